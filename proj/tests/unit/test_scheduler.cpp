#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dashsim/rng.hpp"
#include "dashsim/scheduler.hpp"

namespace {

using namespace dashsim;

// One tracker with a single armed unit per user, shared deadline by default.
DeadlineTracker single_unit_tracker(const std::vector<Packets>& sizes,
                                    const std::vector<Slot>& deadlines) {
  DeadlineTracker tracker(static_cast<int>(sizes.size()));
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    tracker.enqueue(static_cast<int>(i), {sizes[i], 10, 0, 0});
    tracker.begin_stream(static_cast<int>(i), deadlines[i]);
  }
  return tracker;
}

void drain_one(DeadlineTracker& tracker, int user) {
  while (!tracker.unit_complete(user)) tracker.on_packet_delivered(user);
  tracker.on_gop_complete(user, 10);
}

}  // namespace

TEST_CASE("policy names round-trip", "[scheduler]") {
  for (const auto p : {SchedulerPolicy::bdra, SchedulerPolicy::rfra, SchedulerPolicy::wrfra,
                       SchedulerPolicy::dwrfra, SchedulerPolicy::random})
    CHECK(scheduler_from_string(to_string(p)) == p);
  CHECK_THROWS_AS(scheduler_from_string("edf"), std::invalid_argument);
}

TEST_CASE("tracker walks a unit through its lifecycle", "[scheduler]") {
  DeadlineTracker tracker(1);
  CHECK(tracker.all_done());
  tracker.enqueue(0, {2, 5, 0, 0});
  tracker.enqueue(0, {3, 5, 0, 1});
  tracker.begin_stream(0, 8);

  CHECK(tracker.active(0));
  CHECK(tracker.user(0).next_deadline == 8);
  CHECK(tracker.user(0).residual == 2);
  CHECK(tracker.user(0).unit_total == 2);

  tracker.on_packet_delivered(0);
  CHECK(tracker.user(0).residual == 1);
  CHECK_FALSE(tracker.unit_complete(0));
  tracker.on_packet_delivered(0);
  CHECK(tracker.unit_complete(0));

  tracker.on_gop_complete(0, 5);
  CHECK(tracker.user(0).next_deadline == 13);  // moved by the finished unit's advance
  CHECK(tracker.user(0).residual == 3);
  CHECK(tracker.user(0).gop_index == 1);
  CHECK(tracker.user(0).completed_deadline == 8);

  drain_one(tracker, 0);
  CHECK(tracker.all_done());
  CHECK(tracker.user(0).unit_total == 0);
}

TEST_CASE("tracker rejects empty units and empty queues", "[scheduler]") {
  DeadlineTracker tracker(1);
  CHECK_THROWS_AS(tracker.enqueue(0, {0, 5, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(tracker.begin_stream(0, 4), std::invalid_argument);
}

TEST_CASE("expiry stalls only armed late demand and extends the deadline", "[scheduler]") {
  DeadlineTracker tracker = single_unit_tracker({3}, {6});
  CHECK_FALSE(tracker.on_deadline_expiry(0, 5, 4).has_value());  // future deadline
  const auto stall = tracker.on_deadline_expiry(0, 6, 4);
  REQUIRE(stall.has_value());
  CHECK(stall->user == 0);
  CHECK(stall->slot == 6);
  CHECK(tracker.user(0).next_deadline == 10);  // grant pushes the deadline out
  CHECK_FALSE(tracker.on_deadline_expiry(0, 7, 4).has_value());

  drain_one(tracker, 0);
  CHECK_FALSE(tracker.on_deadline_expiry(0, 50, 4).has_value());  // done users never stall
  CHECK_THROWS_AS(single_unit_tracker({1}, {0}).on_deadline_expiry(0, 0, 0),
                  std::invalid_argument);
}

TEST_CASE("requests for already-served deadlines are dropped", "[scheduler]") {
  DeadlineTracker tracker = single_unit_tracker({2}, {5});
  drain_one(tracker, 0);
  CHECK(tracker.user(0).completed_deadline == 5);
  CHECK_FALSE(tracker.accept_request(0, 5, {2, 10, 0, 1}));
  CHECK(tracker.all_done());
  CHECK(tracker.accept_request(0, 15, {2, 10, 0, 1}));
  CHECK(tracker.active(0));
  CHECK(tracker.user(0).next_deadline == 15);
}

TEST_CASE("earliest deadline wins outright", "[scheduler]") {
  DeadlineTracker tracker = single_unit_tracker({4, 4, 4}, {9, 7, 8});
  CHECK(bdra_decide(tracker, 0) == 1);
}

TEST_CASE("deadline ties fall to the smallest unit then lowest index", "[scheduler]") {
  // all due together, sizes 8 / 5 / 3: the small unit is the cheapest save
  DeadlineTracker tracker = single_unit_tracker({8, 5, 3}, {10, 10, 10});
  CHECK(bdra_decide(tracker, 0) == 2);
  drain_one(tracker, 2);
  CHECK(bdra_decide(tracker, 0) == 1);
  drain_one(tracker, 1);
  CHECK(bdra_decide(tracker, 0) == 0);

  DeadlineTracker even = single_unit_tracker({5, 5}, {10, 10});
  CHECK(bdra_decide(even, 0) == 0);  // full tie goes to the lower index
}

TEST_CASE("idle selection is empty", "[scheduler]") {
  DeadlineTracker tracker(2);
  CounterRng rng(1, 0, StreamRole::tiebreak);
  RoundRobinState rr(2);
  CHECK_FALSE(bdra_decide(tracker, 0).has_value());
  CHECK_FALSE(bdra_decide_random_ties(tracker, 0, rng).has_value());
  CHECK_FALSE(rfra_decide(rr, tracker).has_value());
  CHECK_FALSE(random_decide(tracker, rng).has_value());
  const std::vector<double> w = {1.0, 1.0};
  CHECK_FALSE(wrfra_decide(rr, tracker, w).has_value());
  CHECK_FALSE(dwrfra_decide(rr, tracker).has_value());
}

TEST_CASE("random deadline ties stay inside the tied set", "[scheduler]") {
  DeadlineTracker tracker = single_unit_tracker({4, 4, 4}, {10, 10, 12});
  CounterRng rng(7, 0, StreamRole::tiebreak);
  std::array<int, 3> counts = {0, 0, 0};
  for (int i = 0; i < 2000; ++i) {
    const auto pick = bdra_decide_random_ties(tracker, 0, rng);
    REQUIRE(pick.has_value());
    REQUIRE(*pick != 2);  // later deadline can never win
    ++counts[static_cast<std::size_t>(*pick)];
  }
  CHECK(counts[0] > 800);  // roughly even split across the tie
  CHECK(counts[1] > 800);

  DeadlineTracker unique = single_unit_tracker({4, 4}, {3, 9});
  CHECK(bdra_decide_random_ties(unique, 0, rng) == 0);
}

TEST_CASE("round robin cycles active users", "[scheduler]") {
  DeadlineTracker tracker = single_unit_tracker({100, 100, 100}, {10, 10, 10});
  RoundRobinState rr(3);
  std::vector<int> picks;
  for (int i = 0; i < 6; ++i) picks.push_back(*rfra_decide(rr, tracker));
  CHECK(picks == std::vector<int>{0, 1, 2, 0, 1, 2});
}

TEST_CASE("round robin quantum serves packets in runs", "[scheduler]") {
  DeadlineTracker tracker = single_unit_tracker({100, 100}, {10, 10});
  RoundRobinState rr(2);
  std::vector<int> picks;
  for (int i = 0; i < 8; ++i) picks.push_back(*rfra_decide(rr, tracker, 3));
  CHECK(picks == std::vector<int>{0, 0, 0, 1, 1, 1, 0, 0});
  CHECK_THROWS_AS(rfra_decide(rr, tracker, 0), std::invalid_argument);
}

TEST_CASE("round robin skips users without demand", "[scheduler]") {
  DeadlineTracker tracker = single_unit_tracker({100, 2, 100}, {10, 10, 10});
  RoundRobinState rr(3);
  CHECK(*rfra_decide(rr, tracker) == 0);
  CHECK(*rfra_decide(rr, tracker) == 1);
  tracker.on_packet_delivered(1);
  tracker.on_packet_delivered(1);
  tracker.on_gop_complete(1, 10);  // user 1 drained, queue empty
  CHECK(*rfra_decide(rr, tracker) == 2);
  CHECK(*rfra_decide(rr, tracker) == 0);
  CHECK(*rfra_decide(rr, tracker) == 2);
}

TEST_CASE("weighted round robin follows its deficit schedule exactly", "[scheduler]") {
  DeadlineTracker tracker = single_unit_tracker({1000, 1000, 1000}, {10, 10, 10});
  RoundRobinState rr(3);
  const std::vector<double> weights = {2.0, 1.0, 4.0};
  std::vector<int> picks;
  for (int i = 0; i < 8; ++i) picks.push_back(*wrfra_decide(rr, tracker, weights));
  CHECK(picks == std::vector<int>{2, 0, 2, 2, 0, 1, 2, 2});

  // 700 decisions split exactly in weight proportion: the credit state is
  // periodic with period 7
  std::vector<int> counts(3, 0);
  for (int i = 8; i < 700; ++i) ++counts[static_cast<std::size_t>(*wrfra_decide(rr, tracker, weights))];
  for (int p : picks) ++counts[static_cast<std::size_t>(p)];
  CHECK(counts == std::vector<int>{200, 100, 400});
}

TEST_CASE("equal weights reduce weighted round robin to strict round robin", "[scheduler]") {
  // Any activity pattern: both selectors must agree decision by decision.
  const std::vector<Packets> sizes = {7, 3, 5, 9};
  DeadlineTracker a = single_unit_tracker(sizes, {10, 10, 10, 10});
  DeadlineTracker b = single_unit_tracker(sizes, {10, 10, 10, 10});
  RoundRobinState rr_a(4);
  RoundRobinState rr_b(4);
  const std::vector<double> weights = {3.0, 3.0, 3.0, 3.0};
  CounterRng rng(13, 0, StreamRole::instance);
  for (int step = 0; step < 400 && !a.all_done(); ++step) {
    const auto pa = rfra_decide(rr_a, a, 2);
    const auto pb = wrfra_decide(rr_b, b, weights, 2);
    REQUIRE(pa.has_value());
    REQUIRE(pb.has_value());
    REQUIRE(*pa == *pb);
    if (rng.bernoulli(0.7)) {  // loss pattern shared by both copies
      a.on_packet_delivered(*pa);
      b.on_packet_delivered(*pb);
      if (a.unit_complete(*pa)) {
        a.on_gop_complete(*pa, 10);
        b.on_gop_complete(*pb, 10);
      }
    }
  }
  CHECK(a.all_done());
}

TEST_CASE("weighted round robin clears credit of idle users", "[scheduler]") {
  DeadlineTracker tracker = single_unit_tracker({1, 1000}, {10, 10});
  RoundRobinState rr(2);
  const std::vector<double> weights = {8.0, 1.0};
  CHECK(*wrfra_decide(rr, tracker, weights) == 0);
  drain_one(tracker, 0);  // heavy-weight user leaves
  // remaining user is served at full rate, no deficit starvation
  for (int i = 0; i < 5; ++i) CHECK(*wrfra_decide(rr, tracker, weights) == 1);
  // user 0 returns with no stored credit from its absence
  tracker.accept_request(0, 30, {1000, 10, 0, 1});
  CHECK(rr.deficit[0] <= 1.0);
  std::vector<int> counts(2, 0);
  for (int i = 0; i < 900; ++i) ++counts[static_cast<std::size_t>(*wrfra_decide(rr, tracker, weights))];
  CHECK(counts[0] == Catch::Approx(800).margin(2));  // 8:1 split resumes
  CHECK(counts[1] == Catch::Approx(100).margin(2));
}

TEST_CASE("weighted round robin validates its inputs", "[scheduler]") {
  DeadlineTracker tracker = single_unit_tracker({5, 5}, {10, 10});
  RoundRobinState rr(2);
  const std::vector<double> short_w = {1.0};
  CHECK_THROWS_AS(wrfra_decide(rr, tracker, short_w), std::invalid_argument);
  const std::vector<double> bad_w = {1.0, 0.0};
  CHECK_THROWS_AS(wrfra_decide(rr, tracker, bad_w), std::invalid_argument);
  const std::vector<double> good_w = {1.0, 2.0};
  CHECK_THROWS_AS(wrfra_decide(rr, tracker, good_w, 0), std::invalid_argument);
}

TEST_CASE("demand-weighted round robin tracks unit sizes", "[scheduler]") {
  DeadlineTracker tracker = single_unit_tracker({600, 200}, {50, 50});
  RoundRobinState rr(2);
  std::vector<int> picks;
  for (int i = 0; i < 8; ++i) picks.push_back(*dwrfra_decide(rr, tracker));
  // weights 600:200 give user 0 three serves per cycle of four
  CHECK(picks == std::vector<int>{0, 0, 0, 1, 0, 0, 0, 1});
}

TEST_CASE("demand-weighted matches weighted fed the in-service unit sizes", "[scheduler]") {
  const auto build = [] {
    DeadlineTracker t(3);
    const std::vector<std::vector<Packets>> units = {{2, 6, 1}, {4, 2}, {3, 3, 3}};
    for (int i = 0; i < 3; ++i) {
      for (std::size_t k = 0; k < units[static_cast<std::size_t>(i)].size(); ++k)
        t.enqueue(i, {units[static_cast<std::size_t>(i)][k], 10, 0, static_cast<int>(k)});
      t.begin_stream(i, 50);
    }
    return t;
  };
  DeadlineTracker a = build();
  DeadlineTracker b = build();
  RoundRobinState rr_a(3);
  RoundRobinState rr_b(3);
  CounterRng rng(41, 0, StreamRole::instance);
  int guard = 0;
  while (!a.all_done() && guard++ < 500) {
    std::vector<double> weights(3, 1.0);
    for (int i = 0; i < 3; ++i)
      if (a.active(i)) weights[static_cast<std::size_t>(i)] =
          static_cast<double>(a.user(i).unit_total);
    const auto pa = dwrfra_decide(rr_a, a);
    const auto pb = wrfra_decide(rr_b, b, weights);
    REQUIRE(pa.has_value());
    REQUIRE(*pa == *pb);
    if (rng.bernoulli(0.8)) {
      a.on_packet_delivered(*pa);
      b.on_packet_delivered(*pb);
      if (a.unit_complete(*pa)) {
        a.on_gop_complete(*pa, 10);
        b.on_gop_complete(*pb, 10);
      }
    }
  }
  CHECK(a.all_done());
}

TEST_CASE("random selection is uniform over active users", "[scheduler]") {
  DeadlineTracker tracker = single_unit_tracker({100, 1, 100}, {10, 10, 10});
  drain_one(tracker, 1);
  CounterRng rng(29, 0, StreamRole::tiebreak);
  std::array<int, 3> counts = {0, 0, 0};
  for (int i = 0; i < 4000; ++i) ++counts[static_cast<std::size_t>(*random_decide(tracker, rng))];
  CHECK(counts[1] == 0);
  CHECK(std::abs(counts[0] - 2000) < 160);  // ~5 sigma
  CHECK(std::abs(counts[2] - 2000) < 160);
}

TEST_CASE("dispatcher routes to the configured policy", "[scheduler]") {
  CounterRng rng(3, 0, StreamRole::tiebreak);

  Scheduler edf({SchedulerPolicy::bdra, {}, 1, false}, 3);
  DeadlineTracker t1 = single_unit_tracker({8, 5, 3}, {10, 10, 10});
  CHECK(edf.decide(t1, 0, rng) == 2);

  Scheduler rr({SchedulerPolicy::rfra, {}, 1, false}, 3);
  DeadlineTracker t2 = single_unit_tracker({9, 9, 9}, {10, 10, 10});
  CHECK(rr.decide(t2, 0, rng) == 0);
  CHECK(rr.decide(t2, 1, rng) == 1);

  Scheduler weighted({SchedulerPolicy::wrfra, {2.0, 1.0, 4.0}, 1, false}, 3);
  DeadlineTracker t3 = single_unit_tracker({9, 9, 9}, {10, 10, 10});
  CHECK(weighted.decide(t3, 0, rng) == 2);

  Scheduler demand({SchedulerPolicy::dwrfra, {}, 1, false}, 2);
  DeadlineTracker t4 = single_unit_tracker({600, 200}, {10, 10});
  CHECK(demand.decide(t4, 0, rng) == 0);
}
