#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "gpbag/gpbag.hpp"

using namespace gpbag;

TEST_CASE("formula reproduces frozen reference points") {
  // N = 1e6, epsilon = 1, c = 1: delta = 1/ln(ln N), size = ceil(N^delta).
  const SizingPlan p = size_by_formula(1000000, 1.0, 1.0);
  CHECK(p.subset_size == 193);
  CHECK(p.delta == doctest::Approx(0.3808374892).epsilon(1e-9));
  CHECK(p.effective_delta ==
        doctest::Approx(std::log(193.0) / std::log(1e6)).epsilon(1e-12));
  CHECK(p.target_met);
  CHECK_FALSE(p.full_data_fallback);
  CHECK(std::string(sizing_method_name(p.method)) == "formula");

  // Halving c doubles the size; scaling epsilon by 2^10 halves the raw value.
  CHECK(size_by_formula(1000000, 1.0, 0.5).subset_size == 386);
  CHECK(size_by_formula(1000000, 1024.0, 1.0).subset_size == 97);
}

TEST_CASE("formula size moves the right way in every argument") {
  std::vector<std::size_t> ns;
  for (int i = 0; i < 10; ++i)
    ns.push_back(static_cast<std::size_t>(std::llround(std::pow(10.0, 2.0 + 5.0 * i / 9.0))));
  std::vector<double> epsilons;
  for (int i = 0; i < 10; ++i) epsilons.push_back(std::pow(10.0, -3.0 + 4.0 * i / 9.0));
  const std::vector<double> cs{0.5, 1.0, 2.0};

  for (double c : cs) {
    for (std::size_t ei = 0; ei < epsilons.size(); ++ei) {
      std::size_t prev = 0;
      for (std::size_t ni = 0; ni < ns.size(); ++ni) {
        const std::size_t size = size_by_formula(ns[ni], epsilons[ei], c).subset_size;
        CHECK(size >= prev);  // larger datasets never ask for smaller subsets
        prev = size;
      }
    }
    for (std::size_t ni = 0; ni < ns.size(); ++ni) {
      std::size_t prev = size_by_formula(ns[ni], epsilons[0], c).subset_size;
      for (std::size_t ei = 1; ei < epsilons.size(); ++ei) {
        const std::size_t size = size_by_formula(ns[ni], epsilons[ei], c).subset_size;
        CHECK(size <= prev);  // looser accuracy never asks for more rows
        prev = size;
      }
    }
  }
  for (std::size_t ni = 0; ni < ns.size(); ++ni)
    for (std::size_t ei = 0; ei < epsilons.size(); ++ei) {
      const std::size_t lo = size_by_formula(ns[ni], epsilons[ei], 2.0).subset_size;
      const std::size_t mid = size_by_formula(ns[ni], epsilons[ei], 1.0).subset_size;
      const std::size_t hi = size_by_formula(ns[ni], epsilons[ei], 0.5).subset_size;
      CHECK(lo <= mid);
      CHECK(mid <= hi);
    }
}

TEST_CASE("tiny datasets fall back to all rows") {
  const SizingPlan p = size_by_formula(15, 0.1, 1.0);
  CHECK(p.full_data_fallback);
  CHECK(p.subset_size == 15);
  CHECK(p.delta == 1.0);
  CHECK(p.effective_delta == 1.0);

  CHECK_FALSE(size_by_formula(16, 0.1, 1.0).full_data_fallback);
}

TEST_CASE("formula result is clamped to the floor and the dataset") {
  // Large epsilon and c push the raw value below the floor of 8.
  const SizingPlan floor_case = size_by_formula(16, 10.0, 2.0);
  CHECK(floor_case.subset_size == 8);
  CHECK_FALSE(floor_case.full_data_fallback);

  // Small epsilon pushes the raw value past the dataset size.
  const SizingPlan cap_case = size_by_formula(20, 1e-3, 0.5);
  CHECK(cap_case.subset_size == 20);
}

TEST_CASE("formula rejects bad arguments") {
  CHECK_THROWS_AS(size_by_formula(0, 1.0, 1.0), InputError);
  CHECK_THROWS_AS(size_by_formula(100, 0.0, 1.0), InputError);
  CHECK_THROWS_AS(size_by_formula(100, -1.0, 1.0), InputError);
  CHECK_THROWS_AS(size_by_formula(100, std::nan(""), 1.0), InputError);
  CHECK_THROWS_AS(size_by_formula(100, 1.0, 0.0), InputError);
  CHECK_THROWS_AS(size_by_formula(100, 1.0, -2.0), InputError);
}

TEST_CASE("explicit plans normalize and validate") {
  const SizingPlan d = plan_from_delta(1000, 0.5);
  CHECK(d.subset_size == 32);  // ceil(1000^0.5)
  CHECK(std::string(sizing_method_name(d.method)) == "explicit");
  CHECK(plan_from_delta(1000, 1.0).subset_size == 1000);

  const SizingPlan s = plan_from_size(1000, 50);
  CHECK(s.subset_size == 50);
  CHECK(s.delta == doctest::Approx(std::log(50.0) / std::log(1000.0)).epsilon(1e-12));

  CHECK_THROWS_AS(plan_from_delta(0, 0.5), InputError);
  CHECK_THROWS_AS(plan_from_delta(100, 0.0), InputError);
  CHECK_THROWS_AS(plan_from_delta(100, 1.1), InputError);
  CHECK_THROWS_AS(plan_from_delta(100, std::nan("")), InputError);
  CHECK_THROWS_AS(plan_from_size(0, 1), InputError);
  CHECK_THROWS_AS(plan_from_size(100, 0), InputError);
  CHECK_THROWS_AS(plan_from_size(100, 101), InputError);
}

TEST_CASE("probe finds a modest exponent for clean low-dimensional data") {
  SincSpec spec;
  spec.n = 4000;
  const Dataset data = generate_sinc(spec, 17);

  ProbeConfig probe;
  probe.seed = 5;
  const SizingPlan p = infer_delta(data, 0.05, parse_kernel("rbf"), probe);

  CHECK(p.target_met);
  CHECK(p.delta <= 0.6);
  CHECK(std::string(sizing_method_name(p.method)) == "probe");
  REQUIRE(!p.trace.empty());
  CHECK(p.trace.front().delta == doctest::Approx(0.1));
  CHECK(p.trace.back().delta == doctest::Approx(p.delta));
  CHECK(p.trace.back().rmse <= 0.05);
  for (std::size_t i = 0; i + 1 < p.trace.size(); ++i) CHECK(p.trace[i].rmse > 0.05);
  CHECK(p.subset_size ==
        static_cast<std::size_t>(std::ceil(std::pow(4000.0, p.delta))));
}

TEST_CASE("probe that cannot reach epsilon reports the miss honestly") {
  SincSpec spec;
  spec.n = 3000;
  spec.noise_sd = 0.1;  // noise floor far above the requested accuracy
  const Dataset data = generate_sinc(spec, 23);

  ProbeConfig probe;
  probe.sample_size = 120;
  probe.seed = 9;
  probe.optimizer.restarts = 1;
  probe.optimizer.max_iterations = 40;
  const SizingPlan p = infer_delta(data, 1e-9, parse_kernel("rbf"), probe);

  CHECK_FALSE(p.target_met);
  CHECK(p.delta == 1.0);
  CHECK(p.subset_size == 3000);
  CHECK(p.trace.size() == 19);  // the whole grid from 0.1 to 1.0 in 0.05 steps
  for (const auto& point : p.trace) CHECK(point.rmse > 1e-9);
}

TEST_CASE("probe is deterministic under its seed") {
  SincSpec spec;
  spec.n = 2000;
  spec.noise_sd = 0.05;
  const Dataset data = generate_sinc(spec, 3);

  ProbeConfig probe;
  probe.sample_size = 150;
  probe.seed = 41;
  probe.optimizer.restarts = 1;
  probe.optimizer.max_iterations = 40;
  const SizingPlan a = infer_delta(data, 0.2, parse_kernel("rbf"), probe);
  const SizingPlan b = infer_delta(data, 0.2, parse_kernel("rbf"), probe);

  CHECK(a.delta == b.delta);
  CHECK(a.subset_size == b.subset_size);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].rmse == b.trace[i].rmse);
    CHECK(a.trace[i].subset_size == b.trace[i].subset_size);
  }
}

TEST_CASE("probe validates its inputs") {
  SincSpec spec;
  spec.n = 100;
  const Dataset data = generate_sinc(spec, 1);
  const KernelSpec k = parse_kernel("rbf");

  CHECK_THROWS_AS(infer_delta(data, 0.0, k, {}), InputError);
  CHECK_THROWS_AS(infer_delta(data, -0.1, k, {}), InputError);

  ProbeConfig tiny;
  tiny.sample_size = 1;
  CHECK_THROWS_AS(infer_delta(data, 0.1, k, tiny), InputError);

  ProbeConfig bad_fraction;
  bad_fraction.train_fraction = 1.0;
  CHECK_THROWS_AS(infer_delta(data, 0.1, k, bad_fraction), InputError);

  ProbeConfig bad_grid;
  bad_grid.grid_start = 0.9;
  bad_grid.delta_max = 0.5;
  CHECK_THROWS_AS(infer_delta(data, 0.1, k, bad_grid), InputError);

  Dataset one_row;
  one_row.X = Eigen::MatrixXd::Zero(1, 1);
  one_row.y = Eigen::VectorXd::Zero(1);
  CHECK_THROWS_AS(infer_delta(one_row, 0.1, k, {}), InputError);
}
