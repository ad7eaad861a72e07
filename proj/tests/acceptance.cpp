// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cli_harness.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "vds/knn.hpp"
#include "vds/metrics.hpp"
#include "vds/repr_store.hpp"
#include "vds/semantic_basis.hpp"
#include "vds/semantic_logits.hpp"
#include "vds/simd.hpp"
#include "vds/trainer.hpp"

using namespace vds;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double residual_norm(std::span<const double> s, const MatrixD& w, std::size_t target) {
  double total = 0;
  for (std::size_t j = 0; j < w.cols(); ++j) {
    double x = 0;
    for (std::size_t k = 0; k < w.rows(); ++k) x += s[k] * w(k, j);
    if (j == target) x -= 1.0;
    total += x * x;
  }
  return std::sqrt(total);
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Shared by P5-P7: the fixture, its bases and the SimAll-trained module.
struct Fixture {
  ReprBundle bundle = gen_synthetic(SynthSpec{});
  SemanticBases bases = head_bases(bundle);
  MatrixD train = matrix_cast<double>(bundle.train_reps);
  MatrixD test = matrix_cast<double>(bundle.test_reps);
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

double mode_test_accuracy(const TrainResult& r, LogitsMode mode) {
  for (const auto& a : r.report.accuracy)
    if (a.mode == mode) return a.test;
  return -1.0;
}

const TrainResult& trained(LogitsMode mode) {
  static std::map<LogitsMode, TrainResult> cache;
  auto it = cache.find(mode);
  if (it == cache.end()) {
    TrainConfig c;
    c.mode = mode;
    it = cache.emplace(mode, train(fixture().bundle, fixture().bases, c)).first;
  }
  return it->second;
}

Outcome p1() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(1);
  double worst = 0;
  std::size_t deficient = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = 2 + rng.below(63), v = d + rng.below(257 - d);
    MatrixD w;
    if (t % 4 == 0) {
      const std::size_t rank = 1 + rng.below(d - 1);
      w = oracle::matmul(oracle::random_matrix(rng, d, rank), oracle::random_matrix(rng, rank, v));
      ++deficient;
    } else {
      w = oracle::random_matrix(rng, d, v);
    }
    worst = std::max(worst, check_penrose(w, pseudoinverse(w), 1e-8).worst());
  }
  const double secs = seconds_since(start);
  return {worst < 1e-8 && secs < 5.0,
          fmt("worst residual %.3e over 50 matrices (%zu rank-deficient), %.2fs", worst, deficient, secs)};
}

Outcome p2() {
  Rng rng(2);
  const auto w = oracle::random_matrix(rng, 32, 128);
  const auto s = pseudoinverse(w);
  std::size_t violations = 0;
  double worst_gain = -INFINITY;
  for (std::size_t i = 0; i < 128; ++i) {
    const double base = residual_norm(s.row(i), w, i);
    for (int t = 0; t < 100; ++t) {
      auto dir = oracle::random_vector(rng, 32);
      double n = 0;
      for (double x : dir) n += x * x;
      n = std::sqrt(n);
      std::vector<double> moved(32);
      for (std::size_t k = 0; k < 32; ++k) moved[k] = s(i, k) + 1e-3 * dir[k] / n;
      const double gain = base - residual_norm(moved, w, i);
      worst_gain = std::max(worst_gain, gain);
      violations += gain > 1e-9;
    }
  }
  return {violations == 0, fmt("12800 perturbations, %zu reduced the residual, max reduction %.3e",
                               violations, worst_gain)};
}

Outcome p3() {
  const auto sa = estimate_flops(LogitsMode::SimAll, 4096, 128256);
  const auto mm = estimate_flops(LogitsMode::MatMul, 4096, 128256);
  const auto gt = estimate_flops(LogitsMode::SimGT, 4096, 128256);
  return {sa == 3152019456ULL && mm == 1050673152ULL && gt == 24576ULL,
          fmt("sim-all %" PRIu64 ", mat-mul %" PRIu64 ", sim-gt %" PRIu64, sa, mm, gt)};
}

Outcome p4() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0;
  std::string where;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const auto g = oracle::make_grad_problem(1000 + trial, 32, 4);
    // Alternate the loss support so both paths are covered.
    const auto support = trial % 2 ? LossSupport::LabelTokensOnly : LossSupport::FullVocabulary;
    for (auto mode : kAllModes) {
      const ClusteringObjective obj(g.bundle, g.bases, mode, 2.0, support);
      const auto r = oracle::finite_difference_check(obj, g.params, g.batch);
      if (r.worst_relative > worst) {
        worst = r.worst_relative;
        where = std::string(to_string(mode)) + " " + r.worst_group;
      }
    }
  }
  const double secs = seconds_since(start);
  return {worst < 1e-4 && secs < 60.0,
          fmt("worst relative error %.3e (%s) over 20 trials x 5 modes, %.1fs", worst,
              where.c_str(), secs)};
}

Outcome p5() {
  const auto start = std::chrono::steady_clock::now();
  auto& f = fixture();
  const ClassScorer scorer(f.bundle, f.bases, LogitsMode::SimAll);
  const auto pre = scorer.predict_all(f.test);
  const double pre_acc = accuracy(pre, f.bundle.test_labels);
  const double pre_ari = ari(pre, f.bundle.test_labels);

  const auto& r = trained(LogitsMode::SimAll);
  const auto post = scorer.predict_all(transform_all(r.params, f.test));
  const double post_acc = accuracy(post, f.bundle.test_labels);
  const double post_ari = ari(post, f.bundle.test_labels);
  const double secs = seconds_since(start);
  const bool loss_down = r.report.epoch_loss.back() < r.report.epoch_loss.front();
  return {pre_acc <= 0.60 && post_acc >= 0.95 && post_ari >= 0.90 && post_ari > pre_ari &&
              loss_down && secs < 180.0,
          fmt("baseline acc %.3f (<=0.60), trained acc %.3f (>=0.95), ARI %.3f -> %.3f (>=0.90), "
              "loss %.3f -> %.3f, %.1fs",
              pre_acc, post_acc, pre_ari, post_ari, r.report.epoch_loss.front(),
              r.report.epoch_loss.back(), secs)};
}

Outcome p6() {
  auto& f = fixture();
  const auto& r = trained(LogitsMode::SimAll);
  const auto train_t = transform_all(r.params, f.train);
  const auto test_t = transform_all(r.params, f.test);
  bool ok = true;
  std::string detail;
  for (std::size_t k : {1, 16}) {
    const double raw = knn_eval(f.bundle, f.train, f.test, {k}).accuracy;
    const double clustered = knn_eval(f.bundle, train_t, test_t, {k}).accuracy;
    ok = ok && clustered - raw >= 0.05;
    detail += fmt("k=%zu %.3f -> %.3f; ", k, raw, clustered);
  }
  // Oracle agreement on 500 queries: the 200 test rows under both
  // representations plus 100 fresh random directions.
  const KnnIndex raw_index(f.train, f.bundle.train_labels);
  const KnnIndex t_index(train_t, f.bundle.train_labels);
  Rng rng(6);
  std::size_t agree = 0, total = 0;
  for (std::size_t k : {1, 16}) {
    auto check = [&](const KnnIndex& idx, const MatrixD& refs, std::span<const double> q) {
      agree += idx.predict(q, {k}) == oracle::knn(q, refs, f.bundle.train_labels, k);
      ++total;
    };
    for (std::size_t i = 0; i < 100; ++i) check(raw_index, f.train, f.test.row(i));
    for (std::size_t i = 100; i < 200; ++i) check(t_index, train_t, test_t.row(i));
    for (int i = 0; i < 50; ++i) check(raw_index, f.train, oracle::random_vector(rng, f.bundle.d));
  }
  ok = ok && agree == total;
  detail += fmt("oracle agreement %zu/%zu", agree, total);
  return {ok, detail};
}

Outcome p7() {
  const double sim = mode_test_accuracy(trained(LogitsMode::SimAll), LogitsMode::SimAll);
  const double mm = mode_test_accuracy(trained(LogitsMode::MatMul), LogitsMode::MatMul);
  const double sim_exp = mode_test_accuracy(trained(LogitsMode::SimAllExp), LogitsMode::SimAllExp);
  const double mm_exp = mode_test_accuracy(trained(LogitsMode::MatMulExp), LogitsMode::MatMulExp);
  return {std::abs(sim - mm) <= 0.02 && std::abs(sim_exp - sim) <= 0.02 && mm_exp <= mm + 0.02,
          fmt("trained test acc sim-all %.3f, mat-mul %.3f, sim-all-exp %.3f, mat-mul-exp %.3f",
              sim, mm, sim_exp, mm_exp)};
}

Outcome p8() {
  Rng rng(8);
  std::size_t exp_ok = 0, scale_ok = 0;
  for (int t = 0; t < 1000; ++t) {
    auto z = oracle::random_vector(rng, 2 + rng.below(200));
    for (double& x : z) x *= 5.0;
    exp_ok += argmax(exp_transform(z)) == argmax(z);
  }
  const auto bases = embedding_bases(oracle::random_matrix(rng, 200, 64));
  for (int t = 0; t < 1000; ++t) {
    auto r = oracle::random_vector(rng, 64);
    const auto before = argmax(sim_logits(r, bases));
    const double scale = std::exp(rng.uniform(-10.0, 10.0));
    for (double& x : r) x *= scale;
    scale_ok += argmax(sim_logits(r, bases)) == before;
  }
  return {exp_ok == 1000 && scale_ok == 1000,
          fmt("exp argmax kept %zu/1000, rescaled sim argmax kept %zu/1000", exp_ok, scale_ok)};
}

Outcome p9() {
  Rng rng(9);
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<std::uint32_t> a(n), b(n);
    const std::size_t ka = 1 + rng.below(6), kb = 1 + rng.below(6);
    for (auto& x : a) x = static_cast<std::uint32_t>(rng.below(ka));
    for (auto& x : b) x = static_cast<std::uint32_t>(rng.below(kb));
    worst = std::max(worst, std::abs(ari(a, b) - oracle::ari_pairs(a, b)));
  }
  const std::vector<std::uint32_t> a = {0, 0, 1, 1}, b = {0, 0, 1, 2}, p = {0, 1, 1, 1};
  const double worked = ari(a, b), f1 = macro_f1(p, a, 2);
  return {worst <= 1e-12 && std::abs(worked - 4.0 / 7.0) < 1e-15 && std::abs(f1 - 11.0 / 15.0) < 1e-15,
          fmt("max |ARI - pair count| %.1e over 200, ARI example %.6f, macro-F1 example %.6f", worst,
              worked, f1)};
}

Outcome p10() {
  auto& f = fixture();
  const bool roundtrip = decode_bundle(encode_bundle(f.bundle)) == f.bundle &&
                         encode_bundle(decode_bundle(encode_bundle(f.bundle))) == encode_bundle(f.bundle);

  const auto dir = cli_harness::scratch("acceptance");
  const auto q = [&](const char* name) { return "\"" + (dir / name).string() + "\""; };
  const std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
      {"synth --out " + q("b.vdsr"), {"b.vdsr"}},
      {"bases --in " + q("b.vdsr") + " --out " + q("bases.f32"), {"bases.f32", "bases.f32.json"}},
      {"eval --in " + q("b.vdsr") + " --mode sim-all", {}},
      {"train --in " + q("b.vdsr") + " --epochs 5 --out " + q("m.vdsm"), {"m.vdsm"}},
      {"eval --in " + q("b.vdsr") + " --use-module " + q("m.vdsm"), {}},
      {"knn --in " + q("b.vdsr") + " --k 1 --k 16 --use-module " + q("m.vdsm"), {}},
      {"report --in " + q("b.vdsr") + " --module " + q("m.vdsm") + " --svg " + q("s.svg"), {"s.svg"}},
      {"flops --mode sim-all", {}},
  };
  std::size_t identical = 0;
  std::string failed;
  std::vector<std::string> first;
  for (int pass = 0; pass < 2; ++pass) {
    std::size_t i = 0;
    for (const auto& [args, files] : commands) {
      const auto r = cli_harness::run(args, dir);
      std::string bytes = std::to_string(r.exit_code) + "\n" + r.out;
      for (const auto& file : files) bytes += cli_harness::slurp(dir / file);
      if (pass == 0) {
        first.push_back(bytes);
      } else if (bytes == first[i] && r.exit_code == 0) {
        ++identical;
      } else {
        failed += args.substr(0, args.find(' ')) + " ";
      }
      ++i;
    }
  }

  const std::size_t weights = trained(LogitsMode::SimAll).params.weight_count();
  const std::size_t d = f.bundle.d;
  const bool count_ok = weights * 8 == 33 * d * d;
  return {roundtrip && identical == commands.size() && count_ok,
          fmt("bundle round trip %s, %zu/%zu CLI runs byte-identical%s%s, weights %zu (33/8 d^2 = %zu)",
              roundtrip ? "exact" : "MISMATCH", identical, commands.size(),
              failed.empty() ? "" : " failing: ", failed.c_str(), weights, 33 * d * d / 8)};
}

}  // namespace

int main() {
  std::printf("kernels: %s\n", std::string(simd::to_string(simd::active().isa)).c_str());
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"P1", p1}, {"P2", p2}, {"P3", p3}, {"P4", p4}, {"P5", p5},
      {"P6", p6}, {"P7", p7}, {"P8", p8}, {"P9", p9}, {"P10", p10},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %s  %s\n", name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
