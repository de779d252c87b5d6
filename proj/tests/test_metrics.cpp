#include <optional>
#include <vector>

#include <doctest.h>

#include "gbdtwm/gbdt.hpp"
#include "gbdtwm/metrics.hpp"
#include "gbdtwm/watermark.hpp"
#include "helpers.hpp"

using namespace gbdtwm;

namespace {

Ensemble constant_model(std::vector<double> raw) {
  Ensemble m;
  m.num_features = 2;
  m.class_count = static_cast<int>(raw.size());
  m.base_score = std::move(raw);
  return m;
}

WatermarkEntry entry(int y_wm, int bit = 1, int y_true = 0) {
  WatermarkEntry e;
  e.cand.x = {0.0, 0.0};
  e.cand.y_true = y_true;
  e.bit = bit;
  e.y_wm = y_wm;
  return e;
}

Candidate cand(int y_true) {
  Candidate c;
  c.x = {0.0, 0.0};
  c.y_true = y_true;
  return c;
}

}  // namespace

TEST_CASE("effectiveness counts bit-1 entries predicted as their new label") {
  const Ensemble m = constant_model({0.0, 1.0, 0.5});  // always predicts 1
  const std::vector<WatermarkEntry> entries = {
      entry(1), entry(0), entry(2, 0), entry(2)};
  // Three bit-1 entries, one of which asks for class 1.
  CHECK(effectiveness(m, entries) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  CHECK(effectiveness(m, {entry(1), entry(1)}) == 1.0);
  CHECK(effectiveness(m, {entry(0)}) == 0.0);
  CHECK_THROWS(effectiveness(m, {}));
  CHECK_THROWS(effectiveness(m, {entry(1, 0), entry(2, 0)}));
}

TEST_CASE("general accuracy is the fraction of matching labels") {
  const Ensemble m = constant_model({0.0, 1.0, 0.5});
  const Dataset d = testutil::from_rows(
      {{0.0, 0.0}, {1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}}, {1, 1, 0, 2}, 3);
  CHECK(general_accuracy(m, d) == 0.5);

  Dataset empty;
  empty.num_features = 2;
  empty.class_count = 3;
  CHECK_THROWS(general_accuracy(m, empty));
}

TEST_CASE("robustness compares surviving against embedded entries") {
  const Ensemble one = constant_model({0.0, 1.0, 0.5});   // predicts 1
  const Ensemble zero = constant_model({1.0, 0.0, 0.5});  // predicts 0

  const std::vector<WatermarkEntry> entries = {entry(1), entry(1), entry(0)};

  // Against itself every embedded entry survives.
  auto r = robustness(one, one, entries);
  REQUIRE(r.has_value());
  CHECK(*r == 1.0);

  // The attacked model flipped to class 0: the two embedded entries die.
  r = robustness(one, zero, entries);
  REQUIRE(r.has_value());
  CHECK(*r == 0.0);

  // Entries the watermarked model never predicts as y_wm do not count;
  // here only entry(0) is embedded under `zero` and survives under `zero`.
  r = robustness(zero, zero, entries);
  REQUIRE(r.has_value());
  CHECK(*r == 1.0);

  // Nothing embedded at all: undefined, not zero.
  CHECK(!robustness(one, one, {entry(2)}).has_value());
  CHECK(!robustness(one, one, {}).has_value());
  CHECK(!robustness(one, one, {entry(1, 0)}).has_value());
}

TEST_CASE("candidate resilience tracks unchanged non-selected predictions") {
  const Ensemble init = constant_model({1.0, 0.0, 0.0});  // predicts 0
  const Ensemble wm = constant_model({0.0, 1.0, 0.0});    // predicts 1

  const std::vector<Candidate> rest = {cand(0), cand(1), cand(1), cand(2)};

  // Every prediction moved from 0 to 1.
  auto r = candidate_resilience(init, wm, rest);
  REQUIRE(r.has_value());
  CHECK(*r == 0.0);

  // No embedding happened: nothing moved.
  r = candidate_resilience(init, init, rest);
  REQUIRE(r.has_value());
  CHECK(*r == 1.0);

  // Against ground truth instead of the initial prediction.
  r = candidate_resilience(init, wm, rest, true);
  REQUIRE(r.has_value());
  CHECK(*r == 0.5);

  CHECK(!candidate_resilience(init, wm, {}).has_value());
}

TEST_CASE("adjusted metrics multiply by watermark accuracy") {
  CHECK(adjusted(0.8, 0.5) == 0.4);
  CHECK(adjusted(1.0, 1.0) == 1.0);
  CHECK(adjusted(0.7, 0.0) == 0.0);
}

TEST_CASE("metric order does not depend on entry order") {
  const Ensemble m = constant_model({0.0, 1.0, 0.5});
  std::vector<WatermarkEntry> a = {entry(1), entry(0), entry(2)};
  std::vector<WatermarkEntry> b = {entry(2), entry(1), entry(0)};
  CHECK(effectiveness(m, a) == effectiveness(m, b));
  CHECK(robustness(m, m, a) == robustness(m, m, b));
}
