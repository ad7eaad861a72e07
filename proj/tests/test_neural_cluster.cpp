#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "gradcheck.hpp"
#include "vds/error.hpp"
#include "vds/neural_cluster.hpp"
#include "vds/objective.hpp"
#include "vds/trainer.hpp"

using namespace vds;

namespace {

ErrorCode error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected throw");
  return ErrorCode::Io;
}

double norm_of(const ClusterModuleParams& g) {
  double s = 0;
  g.for_each_group([&](std::string_view, std::span<const double> v) {
    for (double x : v) s += x * x;
  });
  return std::sqrt(s);
}

constexpr LossSupport kSupports[] = {LossSupport::FullVocabulary, LossSupport::LabelTokensOnly};

}  // namespace

TEST_SUITE("neural_cluster") {
  TEST_CASE("dimension must be a multiple of 16") {
    CHECK_NOTHROW(require_module_dim(16));
    CHECK_NOTHROW(require_module_dim(64));
    for (std::size_t d : {0, 8, 24, 65})
      CHECK(error_of([&] { require_module_dim(d); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("parameter accounting") {
    for (std::size_t d : {16, 32, 64, 128}) {
      const auto p = ClusterModuleParams::zeros(d);
      CHECK(p.weight_count() == 4 * d * d + d * d / 8);
      CHECK(p.weight_count() * 8 == 33 * d * d);
      CHECK(p.parameter_count() == p.weight_count() + 2 * d + d + d + d);
    }
    CHECK(ClusterModuleParams::zeros(64).weight_count() == 16896);
  }

  TEST_CASE("initialization") {
    Rng a(42), b(42);
    const auto p = ClusterModuleParams::initialize(32, a);
    CHECK(p == ClusterModuleParams::initialize(32, b));
    for (double x : p.mlp_w1.values()) CHECK(std::abs(x) <= 1.0 / std::sqrt(32.0));
    for (double x : p.mlp_w2.values()) CHECK(std::abs(x) <= 1.0 / std::sqrt(64.0));
    for (double x : p.ca_w2.values()) CHECK(std::abs(x) <= 1.0 / std::sqrt(2.0));
    for (double x : p.ln_gain) CHECK(x == 1.0);
    for (double x : p.mlp_b1) CHECK(x == 0.0);
  }

  TEST_CASE("zero bottleneck gives a half gate") {
    Rng rng(1);
    auto p = ClusterModuleParams::initialize(32, rng);
    const auto r = oracle::random_vector(rng, 32);
    std::fill(p.ca_w1.values().begin(), p.ca_w1.values().end(), 0.0);
    for (double g : ca_forward(p, r)) CHECK(g == 0.5);
    p = ClusterModuleParams::initialize(32, rng);
    std::fill(p.ca_w2.values().begin(), p.ca_w2.values().end(), 0.0);
    for (double g : ca_forward(p, r)) CHECK(g == 0.5);
  }

  TEST_CASE("gate stays inside (0, 1)") {
    Rng rng(2);
    const auto p = ClusterModuleParams::initialize(64, rng);
    for (int t = 0; t < 50; ++t) {
      auto r = oracle::random_vector(rng, 64);
      for (double& x : r) x *= 3.0;
      for (double g : ca_forward(p, r)) {
        CHECK(g > 0.0);
        CHECK(g < 1.0);
      }
    }
  }

  TEST_CASE("forward matches the plain-loop reference") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto g = oracle::make_grad_problem(seed, 32 + 16 * (seed % 3));
      for (std::size_t i = 0; i < g.batch.reps.rows(); ++i) {
        const auto r = g.batch.reps.row(i);
        const auto want = oracle::module_forward(g.params, r);
        const auto got = module_forward(g.params, r);
        for (std::size_t j = 0; j < want.size(); ++j) CHECK(std::abs(got[j] - want[j]) < 1e-10);
      }
    }
  }

  TEST_CASE("layer norm statistics") {
    Rng rng(3);
    const auto p = ClusterModuleParams::initialize(64, rng);
    ForwardCache c;
    for (int t = 0; t < 20; ++t) {
      auto r = oracle::random_vector(rng, 64);
      for (double& x : r) x *= 20.0;  // keeps var(m) far above eps
      forward(p, r, c);
      const double mean = std::accumulate(c.normalized.begin(), c.normalized.end(), 0.0) / 64.0;
      double var = 0;
      for (double x : c.normalized) var += (x - mean) * (x - mean);
      var /= 64.0;
      CHECK(std::abs(mean) < 1e-12);
      // var(m) / (var(m) + eps), which is 1 up to eps / var(m)
      CHECK(var == doctest::Approx(1.0 - kLayerNormEpsilon * c.inv_std * c.inv_std).epsilon(1e-10));
      CHECK(std::abs(var - 1.0) < 1e-5);
    }
  }

  TEST_CASE("zero MLP collapses to the LN bias") {
    Rng rng(4);
    auto p = ClusterModuleParams::initialize(32, rng);
    for (auto* m : {&p.mlp_w1, &p.mlp_w2}) std::fill(m->values().begin(), m->values().end(), 0.0);
    const auto r = oracle::random_vector(rng, 32);
    for (double x : module_forward(p, r)) CHECK(x == 0.0);
    for (double& x : p.ln_bias) x = rng.normal();
    const auto out = module_forward(p, r);
    for (std::size_t j = 0; j < 32; ++j) CHECK(out[j] == p.ln_bias[j]);
  }

  TEST_CASE("transform_all is row-wise") {
    Rng rng(5);
    const auto p = ClusterModuleParams::initialize(32, rng);
    const auto reps = oracle::random_matrix(rng, 7, 32);
    const auto copy = reps;
    const auto out = transform_all(p, reps);
    CHECK(reps == copy);
    REQUIRE(out.rows() == 7);
    REQUIRE(out.cols() == 32);
    for (std::size_t i = 0; i < 7; ++i) {
      const auto row = module_forward(p, reps.row(i));
      for (std::size_t j = 0; j < 32; ++j) CHECK(out(i, j) == row[j]);
    }
  }

  TEST_CASE("non-finite intermediates are reported") {
    Rng rng(6);
    auto p = ClusterModuleParams::initialize(32, rng);
    p.mlp_w2(0, 0) = INFINITY;
    std::vector<double> r(32, 1.0);
    CHECK(error_of([&] { module_forward(p, r); }) == ErrorCode::NonFiniteIntermediate);
  }

  TEST_CASE("loss matches the definition-level reference") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto g = oracle::make_grad_problem(seed);
      for (auto mode : kAllModes)
        for (auto support : kSupports) {
          CAPTURE(to_string(mode));
          CAPTURE(to_string(support));
          const ClusteringObjective obj(g.bundle, g.bases, mode, 3.0, support);
          double want = 0;
          for (std::size_t i = 0; i < g.batch.labels.size(); ++i)
            want += oracle::output_loss(oracle::module_forward(g.params, g.batch.reps.row(i)),
                                        g.batch.labels[i], g.bundle, g.bases, mode, 3.0, support);
          want /= static_cast<double>(g.batch.labels.size());
          CHECK(std::abs(obj.loss(g.params, g.batch) - want) < 1e-10);
          CHECK(loss(g.params, g.batch, g.bases, g.bundle, mode, 3.0, support) ==
                obj.loss(g.params, g.batch));
        }
    }
  }

  TEST_CASE("loss closed forms") {
    const auto g = oracle::make_grad_problem(11);
    const ClusteringObjective gt(g.bundle, g.bases, LogitsMode::SimGT, 10.0, LossSupport::FullVocabulary);
    const auto basis = class_basis(g.bases, g.bundle.verbalizer, 2);
    CHECK(std::abs(gt.output_loss(basis, 2, {})) < 1e-14);

    // An output orthogonal to every class basis gives equal label-token logits.
    MatrixD cls(g.bundle.n_classes, g.bundle.d);
    for (std::size_t c = 0; c < cls.rows(); ++c) {
      const auto b = class_basis(g.bases, g.bundle.verbalizer, c);
      std::copy(b.begin(), b.end(), cls.row(c).begin());
    }
    Rng rng(3);
    auto o = oracle::random_vector(rng, g.bundle.d);
    // Project out the span of the class bases (Gram-Schmidt on the rows).
    std::vector<std::vector<double>> q;
    for (std::size_t c = 0; c < cls.rows(); ++c) {
      std::vector<double> u(cls.row(c).begin(), cls.row(c).end());
      for (const auto& e : q) {
        double dp = 0;
        for (std::size_t j = 0; j < u.size(); ++j) dp += u[j] * e[j];
        for (std::size_t j = 0; j < u.size(); ++j) u[j] -= dp * e[j];
      }
      double n = 0;
      for (double x : u) n += x * x;
      for (double& x : u) x /= std::sqrt(n);
      q.push_back(u);
    }
    for (const auto& e : q) {
      double dp = 0;
      for (std::size_t j = 0; j < o.size(); ++j) dp += o[j] * e[j];
      for (std::size_t j = 0; j < o.size(); ++j) o[j] -= dp * e[j];
    }
    const ClusteringObjective sim(g.bundle, g.bases, LogitsMode::SimAll, 10.0, LossSupport::LabelTokensOnly);
    CHECK(sim.output_loss(o, 1, {}) == doctest::Approx(std::log(4.0)).epsilon(1e-10));
  }

  TEST_CASE("analytic gradients match central differences") {
    for (std::uint64_t seed = 100; seed < 102; ++seed) {
      const auto g = oracle::make_grad_problem(seed);
      for (auto mode : kAllModes)
        for (auto support : kSupports) {
          if (mode == LogitsMode::SimGT && support == LossSupport::LabelTokensOnly) continue;
          CAPTURE(seed);
          CAPTURE(to_string(mode));
          CAPTURE(to_string(support));
          const ClusteringObjective obj(g.bundle, g.bases, mode, 2.0, support);
          const auto r = oracle::finite_difference_check(obj, g.params, g.batch);
          CAPTURE(r.worst_group);
          CHECK(r.worst_relative < 1e-4);
          CHECK(r.entries == g.params.parameter_count());
        }
    }
  }

  TEST_CASE("gradient helper agrees with the objective") {
    const auto g = oracle::make_grad_problem(7);
    ClusterModuleParams a;
    ClusteringObjective(g.bundle, g.bases, LogitsMode::MatMul, 2.0, LossSupport::FullVocabulary)
        .loss_and_grad(g.params, g.batch, a);
    CHECK(grad(g.params, g.batch, g.bases, g.bundle, LogitsMode::MatMul, 2.0,
               LossSupport::FullVocabulary) == a);
  }

  TEST_CASE("dead relu unit has zero gradient") {
    auto g = oracle::make_grad_problem(8);
    g.params.mlp_b1[5] = -1e6;
    const ClusteringObjective obj(g.bundle, g.bases, LogitsMode::SimAll, 10.0, LossSupport::FullVocabulary);
    ClusterModuleParams grads;
    obj.loss_and_grad(g.params, g.batch, grads);
    CHECK(grads.mlp_b1[5] == 0.0);
    for (std::size_t i = 0; i < g.params.d; ++i) CHECK(grads.mlp_w1(i, 5) == 0.0);
    for (std::size_t j = 0; j < g.params.d; ++j) CHECK(grads.mlp_w2(5, j) == 0.0);
  }

  TEST_CASE("stationary point of the ground-truth similarity loss") {
    // Zero gain makes the output the LN bias; setting it to the class basis
    // puts every sample at the loss minimum.
    auto g = oracle::make_grad_problem(9);
    for (auto& l : g.batch.labels) l = 1;
    const auto basis = class_basis(g.bases, g.bundle.verbalizer, 1);
    std::fill(g.params.ln_gain.begin(), g.params.ln_gain.end(), 0.0);
    g.params.ln_bias = basis;
    const ClusteringObjective obj(g.bundle, g.bases, LogitsMode::SimGT, 10.0, LossSupport::FullVocabulary);
    ClusterModuleParams grads;
    const double l = obj.loss_and_grad(g.params, g.batch, grads);
    CHECK(std::abs(l) < 1e-14);
    CHECK(norm_of(grads) < 1e-8);
  }

  TEST_CASE("per-sample losses average to the batch loss") {
    const auto g = oracle::make_grad_problem(10);
    const ClusteringObjective obj(g.bundle, g.bases, LogitsMode::SimAllExp, 10.0, LossSupport::FullVocabulary);
    ClusterModuleParams grads;
    std::vector<double> each;
    const double l = obj.loss_and_grad(g.params, g.batch, grads, &each);
    REQUIRE(each.size() == 4);
    CHECK(l == doctest::Approx(std::accumulate(each.begin(), each.end(), 0.0) / 4.0).epsilon(1e-14));
  }

  TEST_CASE("loss support names") {
    for (auto s : kSupports) CHECK(parse_loss_support(to_string(s)) == s);
    CHECK_FALSE(parse_loss_support("all").has_value());
  }

  TEST_CASE("module file round trip") {
    Rng rng(12);
    ModuleFile m;
    m.params = ClusterModuleParams::initialize(32, rng);
    m.mode = LogitsMode::MatMulExp;
    m.tau = 2.5;
    m.seed = 99;
    m.epochs = 7;
    const auto bytes = encode_module(m);
    CHECK(bytes.compare(0, 4, "VDSM") == 0);
    const auto back = decode_module(bytes);
    CHECK(back.mode == m.mode);
    CHECK(back.tau == 2.5);
    CHECK(back.seed == 99);
    CHECK(back.epochs == 7);
    CHECK(encode_module(back) == bytes);
    std::size_t group = 0;
    std::vector<std::vector<double>> orig;
    m.params.for_each_group([&](std::string_view, std::span<const double> v) { orig.emplace_back(v.begin(), v.end()); });
    back.params.for_each_group([&](std::string_view, std::span<const double> v) {
      for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == static_cast<double>(static_cast<float>(orig[group][i])));
      ++group;
    });

    const auto dir = std::filesystem::temp_directory_path() / "vds_tests";
    std::filesystem::create_directories(dir);
    write_module(m, dir / "m.vdsm");
    CHECK(encode_module(read_module(dir / "m.vdsm")) == bytes);

    auto bad = bytes;
    bad[0] = 'X';
    CHECK(error_of([&] { decode_module(bad); }) == ErrorCode::BadMagic);
    CHECK(error_of([&] { decode_module(bytes.substr(0, bytes.size() - 2)); }) == ErrorCode::Truncated);
    CHECK(error_of([&] { decode_module(bytes + "zz"); }) == ErrorCode::ShapeMismatch);
  }
}
