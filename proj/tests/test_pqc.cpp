#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "qmvit/pqc.hpp"
#include "test_support.hpp"

using namespace qmvit;
using qmvit::test::rel_err;

namespace {

constexpr double pi = std::numbers::pi;

std::vector<double> random_input(std::mt19937_64& eng, int n) {
  std::uniform_real_distribution<double> dist(-pi, pi);
  std::vector<double> x(static_cast<std::size_t>(n));
  for (double& v : x) v = dist(eng);
  return x;
}

}  // namespace

TEST_CASE("ansatz structure") {
  AnsatzSpec spec;
  spec.n_qubits = 4;
  spec.n_layers = 1;

  CHECK(param_count(spec) == 4);
  spec.n_layers = 2;
  CHECK(param_count(spec) == 8);
  spec.n_layers = 1;

  SUBCASE("ring entangler wraps around") {
    const Circuit c = build_ansatz(spec, {0.1, 0.2, 0.3, 0.4});
    REQUIRE(c.gates.size() == 8);
    for (int q = 0; q < 4; ++q) {
      CHECK(c.gates[static_cast<std::size_t>(q)].kind == GateKind::RX);
      CHECK(c.gates[static_cast<std::size_t>(q)].target == q);
    }
    for (int q = 0; q < 4; ++q) {
      const Gate& g = c.gates[static_cast<std::size_t>(4 + q)];
      CHECK(g.kind == GateKind::CNOT);
      CHECK(g.control == q);
      CHECK(g.target == (q + 1) % 4);
    }
  }

  SUBCASE("chain entangler drops the wrap link") {
    spec.entangler = AnsatzSpec::Entangler::CnotChain;
    const Circuit c = build_ansatz(spec, {0.1, 0.2, 0.3, 0.4});
    REQUIRE(c.gates.size() == 7);
    CHECK(c.gates.back().control == 2);
    CHECK(c.gates.back().target == 3);
  }

  SUBCASE("single qubit has no entangler") {
    spec.n_qubits = 1;
    const Circuit c = build_ansatz(spec, {0.5});
    REQUIRE(c.gates.size() == 1);
    CHECK(c.gates[0].kind == GateKind::RX);
  }

  SUBCASE("initial hadamard column comes first") {
    spec.initial_hadamard = true;
    const Circuit c = build_ansatz(spec, {0.1, 0.2, 0.3, 0.4});
    REQUIRE(c.gates.size() == 12);
    for (int q = 0; q < 4; ++q) CHECK(c.gates[static_cast<std::size_t>(q)].kind == GateKind::H);
  }

  SUBCASE("parameter count is enforced") {
    CHECK_THROWS_AS(build_ansatz(spec, {0.1, 0.2}), std::invalid_argument);
  }
}

TEST_CASE("initial parameters are small, uniform and seeded") {
  AnsatzSpec spec;
  spec.n_qubits = 5;
  spec.n_layers = 3;
  const ParamVector a = init_params(spec, 99);
  const ParamVector b = init_params(spec, 99);
  const ParamVector c = init_params(spec, 100);
  CHECK(a == b);
  CHECK(a != c);
  REQUIRE(a.size() == 15);
  for (double t : a) CHECK(std::abs(t) <= pi / 8);
  // not all identical
  bool varied = false;
  for (double t : a) varied = varied || t != a[0];
  CHECK(varied);
}

TEST_CASE("expectation head") {
  AnsatzSpec spec;
  spec.n_qubits = 3;
  spec.n_layers = 0;

  SUBCASE("empty ansatz on the x=0 loader reads all zeros") {
    const auto e = expectation_head(angle_encode({0.0, 0.0, 0.0}), spec, {},
                                    ObservableSpec::all(3));
    for (double v : e) CHECK(std::abs(v) < 1e-12);
  }

  SUBCASE("hadamard column maps the x=0 loader back to |000>, readout all +1") {
    spec.initial_hadamard = true;
    const auto e = expectation_head(angle_encode({0.0, 0.0, 0.0}), spec, {},
                                    ObservableSpec::all(3));
    for (double v : e) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("random instance matches the dense oracle") {
    std::mt19937_64 eng(41);
    spec.n_layers = 2;
    const ParamVector theta = init_params(spec, 7);
    const auto x = random_input(eng, 3);

    const auto got = encoded_expectations(x, angle_encoding_spec(3), spec, theta,
                                          ObservableSpec::all(3));

    Circuit full = loader_circuit(x, angle_encoding_spec(3));
    const Circuit ans = build_ansatz(spec, theta);
    full.gates.insert(full.gates.end(), ans.gates.begin(), ans.gates.end());
    const StateVector ref = apply_dense(dense_unitary(full), new_zero_state(3));
    for (int t = 0; t < 3; ++t) {
      CHECK(rel_err(got[static_cast<std::size_t>(t)], expectation_z(ref, t), 1e-12) < 1e-10);
      CHECK(std::abs(got[static_cast<std::size_t>(t)]) <= 1.0 + 1e-12);
    }
  }

  SUBCASE("readouts actually depend on the input") {
    spec.n_layers = 1;
    const ParamVector theta = init_params(spec, 11);
    const auto obs = ObservableSpec::all(3);
    const auto e1 = encoded_expectations({0.8, -0.5, 1.7}, angle_encoding_spec(3), spec, theta, obs);
    const auto e2 = encoded_expectations({-0.8, 0.5, -1.7}, angle_encoding_spec(3), spec, theta, obs);
    double diff = 0.0;
    for (std::size_t i = 0; i < e1.size(); ++i) diff = std::max(diff, std::abs(e1[i] - e2[i]));
    CHECK(diff > 1e-4);
  }

  SUBCASE("validation") {
    CHECK_THROWS_AS(expectation_head(new_zero_state(2), spec, {}, ObservableSpec::all(2)),
                    std::invalid_argument);
    CHECK_THROWS_AS(expectation_head(new_zero_state(3), spec, {}, ObservableSpec{{3}}),
                    std::out_of_range);
    CHECK_THROWS_AS(expectation_head(new_zero_state(3), spec, {}, ObservableSpec{{}}),
                    std::invalid_argument);
  }
}

TEST_CASE("single-qubit gradient of cos(theta)") {
  // RX(theta)|0> read in Z is cos(theta); at pi/3 the slope is -sin(pi/3)
  AnsatzSpec spec;
  spec.n_qubits = 1;
  spec.n_layers = 1;
  const auto obs = ObservableSpec::single(0);
  const double theta = pi / 3;
  const ParamVector g = param_shift_grad(new_zero_state(1), spec, {theta}, obs, 0);
  REQUIRE(g.size() == 1);
  CHECK(g[0] == doctest::Approx(-std::sin(pi / 3)).epsilon(1e-12));
  const double fd = qmvit::test::central_diff(
      [&](double v) { return expectation_head(new_zero_state(1), spec, {v}, obs)[0]; }, theta);
  CHECK(rel_err(g[0], fd) < 1e-6);
  CHECK(g[0] == doctest::Approx(-0.866025).epsilon(1e-5));
}

TEST_CASE("parameter-shift gradients match central differences") {
  std::mt19937_64 eng(43);
  AnsatzSpec spec;
  spec.n_qubits = 3;
  spec.n_layers = 2;
  const auto obs = ObservableSpec::all(3);

  for (int trial = 0; trial < 10; ++trial) {
    const ParamVector theta = init_params(spec, 1000 + static_cast<std::uint64_t>(trial));
    const auto x = random_input(eng, 3);
    const StateVector prepared = angle_encode(x);

    for (int t = 0; t < 3; ++t) {
      const ParamVector g = param_shift_grad(prepared, spec, theta, obs, t);
      for (std::size_t k = 0; k < theta.size(); ++k) {
        const double fd = qmvit::test::central_diff(
            [&](double v) {
              ParamVector th = theta;
              th[k] = v;
              return expectation_head(prepared, spec, th, obs)[static_cast<std::size_t>(t)];
            },
            theta[k]);
        CHECK(qmvit::test::grad_close(g[k], fd, 1e-6));
      }
    }
  }
}

TEST_CASE("input-shift gradients match central differences") {
  std::mt19937_64 eng(47);
  AnsatzSpec spec;
  spec.n_qubits = 3;
  spec.n_layers = 2;
  const auto obs = ObservableSpec::all(3);
  const auto enc = angle_encoding_spec(3);

  for (int trial = 0; trial < 6; ++trial) {
    const ParamVector theta = init_params(spec, 2000 + static_cast<std::uint64_t>(trial));
    const auto x = random_input(eng, 3);

    for (int t = 0; t < 3; ++t) {
      const auto g = input_shift_grad(x, enc, spec, theta, obs, t);
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double fd = qmvit::test::central_diff(
            [&](double v) {
              auto xx = x;
              xx[j] = v;
              return encoded_expectations(xx, enc, spec, theta, obs)[static_cast<std::size_t>(t)];
            },
            x[j]);
        CHECK(qmvit::test::grad_close(g[j], fd, 1e-6));
      }
    }
  }

  SUBCASE("quanv-style loader gradients too") {
    const auto qenc = quanv_encoding_spec(3);
    const ParamVector theta = init_params(spec, 3000);
    const std::vector<double> x{0.3, 1.9, 2.6};
    for (int t = 0; t < 3; ++t) {
      const auto g = input_shift_grad(x, qenc, spec, theta, obs, t);
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double fd = qmvit::test::central_diff(
            [&](double v) {
              auto xx = x;
              xx[j] = v;
              return encoded_expectations(xx, qenc, spec, theta, obs)[static_cast<std::size_t>(t)];
            },
            x[j]);
        CHECK(qmvit::test::grad_close(g[j], fd, 1e-6));
      }
    }
  }
}

TEST_CASE("empty ansatz has empty parameter gradient and zero input gradient") {
  AnsatzSpec spec;
  spec.n_qubits = 2;
  spec.n_layers = 0;
  const auto obs = ObservableSpec::all(2);
  const std::vector<double> x{0.7, -0.2};

  CHECK(param_shift_grad(angle_encode(x), spec, {}, obs, 0).empty());

  // phase encoding reads 0 for every x when no ansatz follows
  const auto g = input_shift_grad(x, angle_encoding_spec(2), spec, {}, obs, 1);
  for (double v : g) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("weighted shift vjp is the weighted sum of per-target gradients") {
  AnsatzSpec spec;
  spec.n_qubits = 3;
  spec.n_layers = 1;
  const auto obs = ObservableSpec::all(3);
  const ParamVector theta = init_params(spec, 5);
  const StateVector prepared = angle_encode({0.2, 1.0, -0.4});
  const std::vector<double> w{0.5, -1.25, 2.0};

  const ParamVector got = param_shift_vjp(prepared, spec, theta, obs, w);
  ParamVector want(theta.size(), 0.0);
  for (int t = 0; t < 3; ++t) {
    const ParamVector g = param_shift_grad(prepared, spec, theta, obs, t);
    for (std::size_t k = 0; k < g.size(); ++k) want[k] += w[static_cast<std::size_t>(t)] * g[k];
  }
  for (std::size_t k = 0; k < got.size(); ++k)
    CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-12));

  CHECK_THROWS_AS(param_shift_vjp(prepared, spec, theta, obs, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(param_shift_grad(prepared, spec, theta, obs, 3), std::out_of_range);
}
