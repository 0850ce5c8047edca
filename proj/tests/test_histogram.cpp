#include <doctest.h>

#include <sstream>

#include "tailfit/histogram.hpp"

using namespace tailfit;

TEST_CASE("bin mapping: 1 KB bins with sub-KB files in bin 1") {
  CHECK(bin_of_size(0) == 1);
  CHECK(bin_of_size(500) == 1);
  CHECK(bin_of_size(1023) == 1);
  CHECK(bin_of_size(1024) == 2);
  CHECK(bin_of_size(2047) == 2);
  CHECK(bin_of_size(189000) == 185);
}

TEST_CASE("add and totals") {
  SizeHistogram h;
  CHECK(h.empty());
  h.add(1, 3);
  h.add(5);
  h.add(5, 2);
  CHECK(h.total() == 6);
  CHECK(h.count_at(1) == 3);
  CHECK(h.count_at(5) == 3);
  CHECK(h.count_at(2) == 0);
  CHECK(h.k_max_observed() == 5);
  CHECK(h.occupied_bins() == 2);
}

TEST_CASE("tail_count") {
  SizeHistogram h;
  h.add(1, 4);
  h.add(10, 2);
  h.add(100, 1);
  CHECK(h.tail_count(1) == 7);
  CHECK(h.tail_count(2) == 3);
  CHECK(h.tail_count(10) == 3);
  CHECK(h.tail_count(11) == 1);
  CHECK(h.tail_count(101) == 0);
}

TEST_CASE("merge equals single pass") {
  SizeHistogram a, b, whole;
  a.add(1, 2);
  a.add(7, 1);
  b.add(7, 4);
  b.add(3, 5);
  whole.add(1, 2);
  whole.add(7, 5);
  whole.add(3, 5);
  a.merge(b);
  CHECK(a.total() == whole.total());
  CHECK(a.k_max_observed() == whole.k_max_observed());
  for (const auto& [k, n] : whole.counts()) CHECK(a.count_at(k) == n);
}

TEST_CASE("csv round trip") {
  SizeHistogram h;
  h.add(3, 7);
  h.add(1, 2);
  h.add(10000, 1);
  std::stringstream ss;
  h.write_csv(ss);
  CHECK(ss.str().rfind("k,count\n1,2\n3,7\n", 0) == 0);
  SizeHistogram back = SizeHistogram::read_csv(ss);
  CHECK(back.total() == h.total());
  CHECK(back.count_at(3) == 7);
  CHECK(back.count_at(10000) == 1);
  CHECK(back.k_max_observed() == 10000);
}

TEST_CASE("sorted_bins ascending") {
  SizeHistogram h;
  h.add(9);
  h.add(2);
  h.add(5);
  auto bins = h.sorted_bins();
  REQUIRE(bins.size() == 3);
  CHECK(bins[0].first == 2);
  CHECK(bins[1].first == 5);
  CHECK(bins[2].first == 9);
}
