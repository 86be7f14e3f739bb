#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

#include "llmreg/errors.hpp"
#include "llmreg/rng.hpp"
#include "llmreg/solver.hpp"
#include "llmreg/synthetic.hpp"

using namespace llmreg;

namespace {

Eigen::MatrixXd centered(std::initializer_list<double> values) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) m(i++, 0) = v;
  m.array() -= m.mean();
  return m;
}

Eigen::VectorXd centered_vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  v.array() -= v.mean();
  return v;
}

struct RandomInstance {
  Eigen::MatrixXd design;
  Eigen::VectorXd y;
  std::vector<SignConstraint> constraints;
};

RandomInstance random_instance(Rng& rng) {
  const Eigen::Index rows = 1 + static_cast<Eigen::Index>(rng.next_below(10));
  const Eigen::Index cols = 1 + static_cast<Eigen::Index>(rng.next_below(8));
  RandomInstance instance;
  instance.design.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      instance.design(r, c) = rng.next_gaussian();
    }
  }
  // Occasionally duplicate a column to exercise rank deficiency.
  if (cols >= 2 && rng.next_below(4) == 0) {
    instance.design.col(cols - 1) = instance.design.col(0);
  }
  instance.y.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) instance.y(r) = rng.next_gaussian();
  for (Eigen::Index c = 0; c < cols; ++c) {
    switch (rng.next_below(3)) {
      case 0: instance.constraints.push_back(SignConstraint::non_negative); break;
      case 1: instance.constraints.push_back(SignConstraint::non_positive); break;
      default: instance.constraints.push_back(SignConstraint::unrestricted); break;
    }
  }
  return instance;
}

}  // namespace

TEST_CASE("exact recovery on a feasible one-column problem") {
  const Eigen::MatrixXd design = centered({1, 2, 3});
  const Eigen::VectorXd y = centered_vec({2, 4, 6});
  const auto model = fit(design, y, {SignConstraint::non_negative}, 0.0);
  CHECK(model.weights(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(model.objective == doctest::Approx(0.0).epsilon(1e-18));
  const Eigen::VectorXd pred = predict(model, design);
  CHECK((pred - y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("infeasible sign clamps to zero, predictions collapse to the mean") {
  const Eigen::MatrixXd design = centered({1, 2, 3});
  const Eigen::VectorXd y = centered_vec({2, 4, 6});
  const auto model = fit(design, y, {SignConstraint::non_positive}, 0.0);
  CHECK(model.weights(0) == 0.0);  // exact zero, not merely small
  const Eigen::VectorXd pred = predict(model, design);
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    CHECK(pred(i) == doctest::Approx(0.0));  // centered space: mean(y) = 0
  }
}

TEST_CASE("huge lambda drives the weights to zero") {
  const Eigen::MatrixXd design = centered({1, 2, 3, 4});
  const Eigen::VectorXd y = centered_vec({3, 1, 4, 1});
  const auto model = fit(design, y, {SignConstraint::unrestricted}, 1e12);
  CHECK(model.weights.norm() < 1e-5);
}

TEST_CASE("all-free matches the closed-form ridge solution") {
  Rng rng(41);
  for (int round = 0; round < 20; ++round) {
    const Eigen::Index rows = 6 + static_cast<Eigen::Index>(rng.next_below(6));
    const Eigen::Index cols = 1 + static_cast<Eigen::Index>(rng.next_below(4));
    Eigen::MatrixXd design(rows, cols);
    Eigen::VectorXd y(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      y(r) = rng.next_gaussian();
      for (Eigen::Index c = 0; c < cols; ++c) design(r, c) = rng.next_gaussian();
    }
    const double lambda = 0.5;
    const std::vector<SignConstraint> constraints(static_cast<std::size_t>(cols),
                                                  SignConstraint::unrestricted);
    const auto model = fit(design, y, constraints, lambda);
    const Eigen::MatrixXd gram =
        design.transpose() * design +
        lambda * Eigen::MatrixXd::Identity(cols, cols);
    const Eigen::VectorXd closed_form = gram.ldlt().solve(design.transpose() * y);
    CHECK((model.weights - closed_form).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("all-free with lambda zero matches ordinary least squares on tall designs") {
  Rng rng(4242);
  for (int round = 0; round < 10; ++round) {
    const Eigen::Index rows = 8;
    const Eigen::Index cols = 3;
    Eigen::MatrixXd design(rows, cols);
    Eigen::VectorXd y(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      y(r) = rng.next_gaussian();
      for (Eigen::Index c = 0; c < cols; ++c) design(r, c) = rng.next_gaussian();
    }
    const std::vector<SignConstraint> constraints(3, SignConstraint::unrestricted);
    const auto model = fit(design, y, constraints, 0.0);
    const Eigen::VectorXd ols =
        design.colPivHouseholderQr().solve(y);
    CHECK(objective_value(design, y, model.weights, 0.0) ==
          doctest::Approx(objective_value(design, y, ols, 0.0)).epsilon(1e-8));
  }
}

TEST_CASE("zero-column design predicts the training mean") {
  Eigen::MatrixXd design(3, 0);
  Eigen::VectorXd y(3);
  y << 1.0, 2.0, 3.0;
  Standardizer snapshot = Standardizer::identity(0);
  snapshot.has_labels = true;
  snapshot.label_mean = 2.0;
  snapshot.label_scale = 1.0;
  const auto model = fit(design, y.array() - 2.0, {}, 1.0, snapshot, FitOptions{});
  CHECK(model.weights.size() == 0);
  const Eigen::VectorXd pred = predict(model, design);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(pred(i) == doctest::Approx(2.0));

  const auto brute = brute_force_fit(design, y.array() - 2.0, {}, 1.0);
  CHECK(brute.weights.size() == 0);
}

TEST_CASE("brute force rejects too many columns") {
  Eigen::MatrixXd design = Eigen::MatrixXd::Random(4, 13);
  Eigen::VectorXd y = Eigen::VectorXd::Random(4);
  const std::vector<SignConstraint> constraints(13, SignConstraint::non_negative);
  CHECK_THROWS_AS(brute_force_fit(design, y, constraints, 0.0), InvalidArgument);
}

TEST_CASE("brute force equals closed-form ridge in the all-free case") {
  Rng rng(99);
  Eigen::MatrixXd design(6, 3);
  Eigen::VectorXd y(6);
  for (Eigen::Index r = 0; r < 6; ++r) {
    y(r) = rng.next_gaussian();
    for (Eigen::Index c = 0; c < 3; ++c) design(r, c) = rng.next_gaussian();
  }
  const double lambda = 2.0;
  const auto brute = brute_force_fit(
      design, y, std::vector<SignConstraint>(3, SignConstraint::unrestricted), lambda);
  const Eigen::MatrixXd gram =
      design.transpose() * design + lambda * Eigen::MatrixXd::Identity(3, 3);
  const Eigen::VectorXd closed_form = gram.ldlt().solve(design.transpose() * y);
  CHECK((brute.weights - closed_form).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("KKT-clamp example: unconstrained optimum +2 clamps to 0 under non-positive") {
  const Eigen::MatrixXd design = centered({1, 2, 3});
  const Eigen::VectorXd y = centered_vec({2, 4, 6});
  const auto model = fit(design, y, {SignConstraint::non_positive}, 0.0);
  const auto brute = brute_force_fit(design, y, {SignConstraint::non_positive}, 0.0);
  CHECK(model.objective == doctest::Approx(brute.objective).epsilon(1e-12));
  CHECK(brute.weights(0) == 0.0);
  CHECK(kkt_residual(design, y, model) < 1e-6);
}

TEST_CASE("active-set objective matches the exhaustive oracle on 200+ random instances") {
  Rng rng(20240901);
  const std::vector<double> lambdas = {0.0, 0.1, 1.0, 10.0};
  int instances = 0;
  for (int round = 0; round < 60; ++round) {
    const RandomInstance instance = random_instance(rng);
    for (double lambda : lambdas) {
      const auto fast = fit(instance.design, instance.y, instance.constraints, lambda);
      const auto brute =
          brute_force_fit(instance.design, instance.y, instance.constraints, lambda);
      const double tolerance = 1e-8 * (1.0 + brute.objective);
      CHECK(std::abs(fast.objective - brute.objective) <= tolerance);
      CHECK(fast.objective >= brute.objective - tolerance);  // oracle is the floor

      // constraint exactness, not just closeness
      for (Eigen::Index c = 0; c < instance.design.cols(); ++c) {
        if (instance.constraints[static_cast<std::size_t>(c)] ==
            SignConstraint::non_negative) {
          CHECK(fast.weights(c) >= 0.0);
        }
        if (instance.constraints[static_cast<std::size_t>(c)] ==
            SignConstraint::non_positive) {
          CHECK(fast.weights(c) <= 0.0);
        }
      }
      CHECK(kkt_residual(instance.design, instance.y, fast) < 1e-6);
      ++instances;
    }
  }
  CHECK(instances >= 200);
}

TEST_CASE("sign-flip equivariance") {
  Rng rng(314);
  for (int round = 0; round < 20; ++round) {
    Eigen::MatrixXd design(5, 3);
    Eigen::VectorXd y(5);
    for (Eigen::Index r = 0; r < 5; ++r) {
      y(r) = rng.next_gaussian();
      for (Eigen::Index c = 0; c < 3; ++c) design(r, c) = rng.next_gaussian();
    }
    std::vector<SignConstraint> constraints = {SignConstraint::non_negative,
                                               SignConstraint::non_positive,
                                               SignConstraint::unrestricted};
    const auto base = fit(design, y, constraints, 0.5);

    Eigen::MatrixXd flipped_design = design;
    flipped_design.col(0) *= -1.0;
    std::vector<SignConstraint> flipped_constraints = constraints;
    flipped_constraints[0] = flip(constraints[0]);
    const auto flipped = fit(flipped_design, y, flipped_constraints, 0.5);

    CHECK(flipped.weights(0) == doctest::Approx(-base.weights(0)).epsilon(1e-9));
    const Eigen::VectorXd base_pred = design * base.weights;
    const Eigen::VectorXd flipped_pred = flipped_design * flipped.weights;
    CHECK((base_pred - flipped_pred).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("regularization path is monotone") {
  Rng rng(2718);
  Eigen::MatrixXd design(8, 4);
  Eigen::VectorXd y(8);
  for (Eigen::Index r = 0; r < 8; ++r) {
    y(r) = rng.next_gaussian();
    for (Eigen::Index c = 0; c < 4; ++c) design(r, c) = rng.next_gaussian();
  }
  const std::vector<SignConstraint> constraints = {
      SignConstraint::non_negative, SignConstraint::non_positive,
      SignConstraint::unrestricted, SignConstraint::non_negative};

  double previous_residual = -1.0;
  double previous_norm = std::numeric_limits<double>::infinity();
  for (double lambda : {0.0, 0.01, 0.1, 1.0, 10.0, 100.0}) {
    const auto model = fit(design, y, constraints, lambda);
    const double residual = (y - design * model.weights).squaredNorm();
    const double norm = model.weights.norm();
    CHECK(residual >= previous_residual - 1e-10);
    CHECK(norm <= previous_norm + 1e-10);
    previous_residual = residual;
    previous_norm = norm;
  }
}

TEST_CASE("noise-free synthetic: feasible generator coefficients give exact training fit") {
  SyntheticSpec spec;
  spec.features = {{"a", 3.0}, {"b", -2.0}, {"c", 1.5}, {"d", -0.7}};
  spec.regions = 50;
  spec.seed = 4;
  const SyntheticData data = make_synthetic(spec);

  const std::vector<std::size_t> shots = {3, 11, 19, 27, 42};
  const Standardizer standardizer =
      fit_standardizer(data.table.values, &*data.table.labels, shots);
  Eigen::MatrixXd raw(5, 4);
  Eigen::VectorXd y_raw(5);
  for (std::size_t i = 0; i < shots.size(); ++i) {
    raw.row(static_cast<Eigen::Index>(i)) =
        data.table.values.row(static_cast<Eigen::Index>(shots[i]));
    y_raw(static_cast<Eigen::Index>(i)) =
        (*data.table.labels)(static_cast<Eigen::Index>(shots[i]));
  }
  const std::vector<SignConstraint> constraints = {
      SignConstraint::non_negative, SignConstraint::non_positive,
      SignConstraint::non_negative, SignConstraint::non_positive};
  const auto model = fit(standardizer.apply(raw), standardizer.apply_labels(y_raw),
                         constraints, 0.0, standardizer, FitOptions{});
  const Eigen::VectorXd pred = predict(model, raw);
  CHECK((pred - y_raw).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("predict validates column count and reuses training rows consistently") {
  const Eigen::MatrixXd design = centered({1, 2, 3, 4});
  const Eigen::VectorXd y = centered_vec({1, 2, 2, 4});
  const auto model = fit(design, y, {SignConstraint::unrestricted}, 0.1);
  const Eigen::VectorXd all = predict(model, design);
  const Eigen::VectorXd single = predict(model, design.row(2));
  CHECK(single(0) == doctest::Approx(all(2)));

  Eigen::MatrixXd wrong(1, 2);
  wrong << 1.0, 2.0;
  CHECK_THROWS_AS(predict(model, wrong), InvalidArgument);
}

TEST_CASE("non-finite inputs are rejected") {
  Eigen::MatrixXd design(2, 1);
  design << 1.0, std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd y(2);
  y << 1.0, 2.0;
  CHECK_THROWS_AS(fit(design, y, {SignConstraint::non_negative}, 0.0), InvalidArgument);
}

TEST_CASE("weights report ranks by absolute magnitude with name tie-break") {
  ConstrainedFit model;
  model.weights.resize(3);
  model.weights << 0.1, -3.0, 2.0;
  model.constraints = {SignConstraint::unrestricted, SignConstraint::non_positive,
                       SignConstraint::non_negative};
  model.standardizer = Standardizer::identity(3);
  const std::vector<std::string> names = {"small", "big_negative", "big_positive"};
  const std::vector<Category> categories = {Category::mixed, Category::negative,
                                            Category::positive};

  const auto top2 = weights_report(model, names, categories, 2);
  REQUIRE(top2.size() == 2);
  CHECK(top2[0].name == "big_negative");
  CHECK(top2[0].weight == -3.0);
  CHECK(top2[0].category == Category::negative);
  CHECK(top2[1].name == "big_positive");

  const auto all = weights_report(model, names, categories, 10);
  CHECK(all.size() == 3);

  // exact zero still shows up with weight 0
  model.weights(0) = 0.0;
  const auto with_zero = weights_report(model, names, categories, 3);
  CHECK(with_zero[2].weight == 0.0);

  CHECK_THROWS_AS(weights_report(model, names, categories, 0), InvalidArgument);
}

TEST_CASE("iteration cap raises a convergence error with the gradient norm") {
  // three orthogonal columns all need a pivot, so a cap of one iteration trips
  const Eigen::MatrixXd design = Eigen::MatrixXd::Identity(3, 3);
  Eigen::VectorXd y(3);
  y << 1, 1, 1;
  FitOptions options;
  options.max_iterations_per_column = 0;  // floor of one iteration total
  try {
    fit(design, y,
        {SignConstraint::non_negative, SignConstraint::non_negative,
         SignConstraint::non_negative},
        0.0, Standardizer::identity(3), options);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.residual_gradient_norm > 0.0);
  }
}
