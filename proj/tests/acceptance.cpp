// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.
// Usage: acceptance [criterion numbers...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "ddn/archive.hpp"
#include "ddn/dataset.hpp"
#include "ddn/ddn_model.hpp"
#include "ddn/metrics.hpp"
#include "oracles.hpp"

using namespace ddn;
namespace fs = std::filesystem;

namespace {

struct outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double mean_abs_diff(const vec& a, const vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

double max_abs_diff(const vec& a, const vec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// ---------------------------------------------------------------------------

outcome mrf_inference_suite() {
  rng gen(20240601);
  outcome out;
  double worst_gibbs = 0.0, worst_bp = 0.0;
  std::size_t map_ok = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n_x = 4 + gen.uniform_int(7);
    const std::size_t n_e = gen.uniform_int(3);
    const auto mrf = oracle::random_mrf(gen, n_x, n_e, 0.35, 2.0);
    std::vector<std::uint8_t> ev(n_e);
    for (auto& b : ev) b = gen.bernoulli(0.5);
    const auto exact = oracle::enumerate_marginals(mrf, ev);

    rng chain = rng::derive(7, "acceptance-gibbs", t);
    const auto g = gibbs_marginals(mrf, ev, {}, chain);
    worst_gibbs = std::max(worst_gibbs, mean_abs_diff(g.p, exact));

    // Scope-counted i-bound: width + 1 variables fit every bucket.
    const std::size_t w = induced_width(mrf, ev);
    for (std::size_t ib = std::max<std::size_t>(2, w + 1); ib <= std::max<std::size_t>(2, w + 1) + 1; ++ib) {
      bp_config cfg;
      cfg.i_bound = ib;
      worst_bp = std::max(worst_bp, max_abs_diff(bp_marginals(mrf, ev, cfg).p, exact));
    }

    rng search(1);
    map_ok += map_assignment(mrf, ev, {}, search).score == oracle::brute_force_max(mrf, ev);
  }
  out.pass = worst_gibbs <= 0.02 && worst_bp <= 1e-6 && map_ok == 50;
  out.detail = "gibbs worst MAE " + fmt("%.4f", worst_gibbs) + ", bp worst error " + fmt("%.2e", worst_bp) +
               ", map exact " + std::to_string(map_ok) + "/50";
  return out;
}

// ---------------------------------------------------------------------------

outcome gradient_suite() {
  rng gen(99);
  double worst_pll = 0.0, worst_ce_p = 0.0, worst_ce_in = 0.0, worst_cpll = 0.0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    auto mrf = oracle::random_mrf(gen, 2 + gen.uniform_int(4), gen.uniform_int(3), 0.6, 2.0);
    binary_matrix data(20, mrf.node_count());
    for (auto& b : data.bits) b = gen.bernoulli(0.5);
    const double l2 = t % 2 ? 0.05 : 0.0;
    const auto num = finite_diff_grad(
        [&](const vec& w) {
          auto copy = mrf;
          copy.weights() = w;
          return pll(copy, data, l2);
        },
        mrf.weights());
    worst_pll = std::max(worst_pll, compare_gradients(pll_grad(mrf, data, l2), num).max_rel_err);
  }
  for (int t = 0; t < trials; ++t) {
    const std::size_t dim = 1 + gen.uniform_int(6);
    conditional_classifier c;
    if (t % 3 == 0) {
      c = conditional_classifier::make_lr(dim, 0.0);
    } else {
      std::vector<std::size_t> hidden(1 + gen.uniform_int(3));
      for (auto& h : hidden) h = 2 + gen.uniform_int(5);
      c = conditional_classifier::make_mlp(dim, hidden, 0.05, gen);
    }
    for (auto& p : c.net().params()) p = gen.normal();
    const bool pen = c.kind() == classifier_kind::mlp;
    vec input(dim);
    for (auto& v : input) v = gen.normal();
    const double target = gen.bernoulli(0.5);
    const auto g = c.cross_entropy_grad(input, target, pen);
    const auto np = finite_diff_grad(
        [&](const vec& w) {
          auto copy = c;
          copy.net().params() = w;
          return copy.loss(input, target, pen);
        },
        c.net().params());
    const auto ni = finite_diff_grad([&](const vec& in) { return c.loss(in, target, pen); }, input);
    worst_ce_p = std::max(worst_ce_p, compare_gradients(g.params, np).max_rel_err);
    worst_ce_in = std::max(worst_ce_in, compare_gradients(g.input, ni).max_rel_err);
  }
  for (int t = 0; t < trials; ++t) {
    const std::size_t d = 1 + gen.uniform_int(3), m = 1 + gen.uniform_int(3), n = 2 + gen.uniform_int(2);
    deep_dependency_network model{backbone::make(d, {3}, m, gen.next_u64()),
                                  t % 2 ? conditional_dn::make_mlp(n, m, {4, 3}, 0.0, gen.next_u64())
                                        : conditional_dn::make_lr(n, m, 0.0)};
    for (auto& p : model.bb.net.params()) p = 0.8 * gen.normal();
    for (auto& c : model.head.classifiers) {
      for (auto& p : c.net().params()) p = 0.8 * gen.normal();
    }
    std::vector<example> batch(3);
    for (auto& ex : batch) {
      ex.v.resize(d);
      for (auto& v : ex.v) v = gen.normal();
      ex.x.resize(n);
      for (auto& b : ex.x) b = gen.bernoulli(0.5);
    }
    auto total = [&](const deep_dependency_network& mm) {
      double s = 0.0;
      for (const auto& ex : batch) s += cpll_loss(mm, ex.v, ex.x);
      return s;
    };
    // Pi and Gamma stacked into one parameter vector.
    vec theta = model.bb.net.params();
    for (const auto& c : model.head.classifiers) theta.insert(theta.end(), c.net().params().begin(), c.net().params().end());
    auto unpack = [&](const vec& th) {
      auto copy = model;
      std::size_t k = 0;
      for (auto& p : copy.bb.net.params()) p = th[k++];
      for (auto& c : copy.head.classifiers) {
        for (auto& p : c.net().params()) p = th[k++];
      }
      return copy;
    };
    const auto num = finite_diff_grad([&](const vec& th) { return total(unpack(th)); }, theta);
    const auto g = cpll_grad(model, batch);
    vec analytic = g.backbone;
    for (const auto& h : g.head) analytic.insert(analytic.end(), h.begin(), h.end());
    worst_cpll = std::max(worst_cpll, compare_gradients(analytic, num).max_rel_err);
  }
  outcome out;
  out.pass = worst_pll <= 1e-4 && worst_ce_p <= 1e-4 && worst_ce_in <= 1e-4 && worst_cpll <= 1e-4;
  out.detail = "worst rel err: pll " + fmt("%.1e", worst_pll) + ", ce params " + fmt("%.1e", worst_ce_p) +
               ", ce input " + fmt("%.1e", worst_ce_in) + ", cpll " + fmt("%.1e", worst_cpll) + " (100 each)";
  return out;
}

// ---------------------------------------------------------------------------

outcome structure_recovery() {
  outcome out;
  double worst_p = 1.0, worst_r = 1.0;
  bool cap_ok = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    rng gen = rng::derive(seed, "acceptance-chain");
    planted_spec spec;
    spec.n_labels = 5;
    spec.feature_noise = -1.0;
    spec.unary_weights.assign(5, 0.0);
    for (std::size_t i = 0; i + 1 < 5; ++i) {
      const double w = gen.bernoulli(0.5) ? 2.0 : -2.0;
      spec.edges.push_back({i, i + 1});
      spec.edge_weights.push_back(w);
      // Conjunctive features: -w/2 on both ends balances each node's marginal.
      spec.unary_weights[i] -= w / 2;
      spec.unary_weights[i + 1] -= w / 2;
    }
    const auto data = gen_planted_mrf_dataset(gen, spec, 10000).labels();
    const structure_config cfg;  // default schedule, cap 10
    const auto res = learn_structure(data, cfg);
    const std::set<edge> truth(spec.edges.begin(), spec.edges.end());
    std::size_t tp = 0;
    std::vector<std::size_t> deg(5, 0);
    for (const auto& e : res.edges) {
      tp += truth.count(e);
      ++deg[e.first];
      ++deg[e.second];
    }
    for (auto k : deg) cap_ok = cap_ok && k <= cfg.neighbor_cap;
    const double p = res.edges.empty() ? 0.0 : static_cast<double>(tp) / static_cast<double>(res.edges.size());
    const double r = static_cast<double>(tp) / static_cast<double>(truth.size());
    worst_p = std::min(worst_p, p);
    worst_r = std::min(worst_r, r);
  }
  out.pass = worst_p >= 0.9 && worst_r >= 0.9 && cap_ok;
  out.detail = "worst precision " + fmt("%.2f", worst_p) + ", worst recall " + fmt("%.2f", worst_r) +
               (cap_ok ? ", cap respected" : ", cap violated") + " (5 seeds)";
  return out;
}

// ---------------------------------------------------------------------------

outcome ddn_inference_consistency() {
  // P(x0, x1 | e) proportional to exp((a + w e) x0 + b x1 + c x0 x1).
  const double a = 0.5, w = 1.0, b = -1.0, c = 2.0, e0 = 0.4;
  auto head = conditional_dn::make_lr(2, 1, 0.0);
  head.classifiers[0].net().bias(0, 0) = a;
  head.classifiers[0].net().weight(0, 0, 0) = w;
  head.classifiers[0].net().weight(0, 0, 1) = c;
  head.classifiers[1].net().bias(0, 0) = b;
  head.classifiers[1].net().weight(0, 0, 1) = c;
  double z = 0.0, m0 = 0.0, m1 = 0.0;
  for (int x0 = 0; x0 < 2; ++x0) {
    for (int x1 = 0; x1 < 2; ++x1) {
      const double p = std::exp((a + w * e0) * x0 + b * x1 + c * x0 * x1);
      z += p;
      m0 += x0 * p;
      m1 += x1 * p;
    }
  }
  ddn_inference_config cfg;
  cfg.n_samples = 50000;
  rng gen(2024);
  const auto est = infer_from_evidence(head, vec{e0}, cfg, gen);
  const double err = std::max(std::abs(est.p[0] - m0 / z), std::abs(est.p[1] - m1 / z));

  auto indep = conditional_dn::make_lr(3, 2, 0.0);
  rng wgen(5);
  for (auto& cl : indep.classifiers) {
    cl.net().weight(0, 0, 0) = wgen.normal();
    cl.net().weight(0, 0, 1) = wgen.normal();
    cl.net().bias(0, 0) = wgen.normal();
  }
  const vec e{0.2, 0.9};
  const std::vector<std::uint8_t> any_x{0, 0, 0};
  bool exact = true;
  for (std::size_t n_samples : {1, 2, 10, 100, 1000, 50000}) {
    cfg.n_samples = n_samples;
    const auto p = infer_from_evidence(indep, e, cfg, gen).p;
    for (std::size_t i = 0; i < 3; ++i) exact = exact && p[i] == indep.conditional_full(i, e, any_x);
  }
  outcome out;
  out.pass = err <= 0.02 && exact;
  out.detail = "mixture error " + fmt("%.4f", err) + " at N=50000, label-independent head " +
               (exact ? "exact" : "NOT exact") + " for N in {1..50000}";
  return out;
}

// ---------------------------------------------------------------------------

outcome metrics_oracle() {
  rng gen(77);
  double worst = 0.0, worst_cube = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t rows = 1 + gen.uniform_int(60), cols = 1 + gen.uniform_int(10);
    score_matrix s(rows, cols);
    const bool coarse = t % 2 == 0;
    for (auto& v : s.values) v = coarse ? static_cast<double>(gen.uniform_int(11)) / 10.0 : gen.uniform();
    binary_matrix truth(rows, cols);
    const double rate = 0.1 + 0.8 * gen.uniform();
    for (auto& b : truth.bits) b = gen.bernoulli(rate);
    const double thr = t % 3 ? 0.5 : 0.3;
    const std::size_t k = 1 + gen.uniform_int(cols);
    auto track = [&](double x, double y) { worst = std::max(worst, std::abs(x - y)); };
    track(mean_average_precision(s, truth), oracle::map(s, truth));
    track(lrap(s, truth), oracle::lrap(s, truth));
    track(subset_accuracy(s, truth, thr), oracle::subset_accuracy(s, truth, thr));
    track(jaccard_index(s, truth, thr), oracle::jaccard(s, truth, thr));
    const auto rep = prf_suite(s, truth, thr, k);
    for (const auto& [mine, ref] : {std::pair{rep.at_threshold, oracle::prf(s, truth, false, thr, k)},
                                    std::pair{rep.top_k, oracle::prf(s, truth, true, thr, k)}}) {
      track(mine.cp, ref.cp);
      track(mine.cr, ref.cr);
      track(mine.cf1, ref.cf1);
      track(mine.op, ref.op);
      track(mine.or_, ref.or_);
      track(mine.of1, ref.of1);
    }
    auto cubed = s;
    for (auto& v : cubed.values) v = v * v * v;
    worst_cube = std::max(worst_cube, std::abs(mean_average_precision(cubed, truth) - mean_average_precision(s, truth)));
    worst_cube = std::max(worst_cube, std::abs(lrap(cubed, truth) - lrap(s, truth)));
  }
  outcome out;
  out.pass = worst <= 1e-9 && worst_cube <= 1e-12;
  out.detail = "worst oracle gap " + fmt("%.1e", worst) + ", worst cube drift " + fmt("%.1e", worst_cube) +
               " (200 matrices)";
  return out;
}

// ---------------------------------------------------------------------------

// Labels x0, x1 ~ Bern(1/2), x2 = x0 xor x1; v = [x0 + N(0, .3^2), x1 + N(0, .3^2), N(0, 1)].
dataset xor_dataset(rng& gen, std::size_t rows, const std::string& prefix) {
  dataset d{3, 3, {}, {}};
  for (std::size_t r = 0; r < rows; ++r) {
    const std::uint8_t a = gen.bernoulli(0.5), b = gen.bernoulli(0.5);
    d.examples.push_back({prefix + std::to_string(r), {a + 0.3 * gen.normal(), b + 0.3 * gen.normal(), gen.normal()},
                          {a, b, static_cast<std::uint8_t>(a ^ b)}});
  }
  return d;
}

struct xor_scores {
  double base_sa, base_ji, ddn_sa, ddn_ji;
};

xor_scores xor_run(std::uint64_t seed) {
  rng gen = rng::derive(seed, "acceptance-xor-data");
  const auto train = xor_dataset(gen, 5000, "tr");
  const auto test = xor_dataset(gen, 1000, "te");

  // Baseline: independent per-label sigmoid outputs of the backbone (no
  // hidden layer), which cannot represent x2 = x0 xor x1.
  sgd_config bcfg;
  bcfg.epochs = 20;
  bcfg.learning_rate = 0.05;
  bcfg.momentum = 0.9;
  bcfg.seed = seed;
  const auto bb = pretrain_backbone(backbone::make(3, {}, 3, seed), train, bcfg).model;

  // DDN-MLP: pipeline head on e = N(v), then joint fine-tuning.
  labeled_features lf{bb.forward_all(train), train.labels()};
  sgd_config hcfg;
  hcfg.epochs = 20;
  hcfg.learning_rate = 0.01;
  hcfg.momentum = 0.9;
  hcfg.seed = seed;
  const auto head =
      train_pipeline(conditional_dn::make_mlp(3, 3, conditional_dn::default_hidden(3, 3), 0.001, seed), lf, hcfg).dn;
  sgd_config jcfg;
  jcfg.epochs = 5;
  jcfg.learning_rate = 1e-3;
  jcfg.momentum = 0.9;
  jcfg.seed = seed;
  const auto joint = train_joint({bb, head}, train, jcfg).model;

  score_matrix base(test.size(), 3), ddn(test.size(), 3);
  ddn_inference_config icfg;
  icfg.n_samples = 1000;
  for (std::size_t r = 0; r < test.size(); ++r) {
    const auto e = bb.forward(test.examples[r].v);
    std::copy(e.begin(), e.end(), base.values.begin() + r * 3);
    rng chain = rng::derive(seed, "infer", r);
    const auto p = infer(joint, test.examples[r].v, icfg, chain).p;
    std::copy(p.begin(), p.end(), ddn.values.begin() + r * 3);
  }
  const auto truth = test.labels();
  return {subset_accuracy(base, truth), jaccard_index(base, truth), subset_accuracy(ddn, truth),
          jaccard_index(ddn, truth)};
}

outcome xor_directional() {
  std::size_t wins = 0;
  std::ostringstream detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = xor_run(seed);
    const bool win = s.ddn_sa - s.base_sa >= 0.05 && s.ddn_ji - s.base_ji >= 0.02;
    wins += win;
    detail << (seed > 1 ? "; " : "") << "seed " << seed << " SA " << fmt("%.3f", s.base_sa) << "->"
           << fmt("%.3f", s.ddn_sa) << " JI " << fmt("%.3f", s.base_ji) << "->" << fmt("%.3f", s.ddn_ji);
  }
  outcome out;
  out.pass = wins >= 4;
  out.detail = std::to_string(wins) + "/5 seeds win (" + detail.str() + ")";
  return out;
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

outcome determinism_and_persistence() {
  const fs::path root = fs::temp_directory_path() / "ddn_acceptance";
  fs::remove_all(root);
  outcome out;
  std::vector<std::string> mismatches;
  rng gen(31);
  const fs::path a = root / "a", b = root / "b";
  fs::create_directories(a);
  fs::create_directories(b);
  const auto train = xor_dataset(gen, 400, "tr");
  const auto test = xor_dataset(gen, 50, "te");
  for (const auto& dir : {a, b}) {
    save_dataset(train, dir / "train.tsv");
    save_dataset(test, dir / "test.tsv");
  }

  // Every workflow, run once per directory with identical arguments.
  auto workflows = [](const fs::path& d) -> std::vector<std::vector<std::string>> {
    auto p = [&](const char* name) { return (d / name).string(); };
    return {
        {"train", "backbone", "--data", p("train.tsv"), "--seed", "1", "--epochs", "4", "--out", p("bb.json")},
        {"train", "dn-pipeline", "--data", p("train.tsv"), "--backbone", p("bb.json"), "--kind", "mlp", "--hidden",
         "16,16", "--seed", "2", "--epochs", "3", "--jobs", "2", "--out", p("head.json")},
        {"train", "dn-pipeline", "--data", p("train.tsv"), "--seed", "2", "--epochs", "3", "--out", p("lr.json")},
        {"train", "ddn-joint", "--data", p("train.tsv"), "--init-backbone", p("bb.json"), "--init-head",
         p("head.json"), "--seed", "3", "--epochs", "2", "--out", p("ddn.json")},
        {"train", "mrf", "--data", p("train.tsv"), "--backbone", p("bb.json"), "--seed", "4", "--epochs", "3",
         "--out", p("mrf.json")},
        {"infer", "--model", p("ddn.json"), "--data", p("test.tsv"), "--seed", "7", "--jobs", "3", "--out",
         p("ddn.pred"), "--bits-out", p("ddn.bits")},
        {"infer", "--model", p("lr.json"), "--data", p("test.tsv"), "--seed", "7", "--out", p("lr.pred")},
        {"infer", "--model", p("bb.json"), "--data", p("test.tsv"), "--seed", "7", "--out", p("bb.pred")},
        {"infer", "--model", p("mrf.json"), "--backbone", p("bb.json"), "--data", p("test.tsv"), "--seed", "7",
         "--samples", "2000", "--out", p("mrf_gibbs.pred")},
        {"infer", "--model", p("mrf.json"), "--backbone", p("bb.json"), "--data", p("test.tsv"), "--seed", "7",
         "--method", "bp", "--out", p("mrf_bp.pred")},
        {"infer", "--model", p("mrf.json"), "--backbone", p("bb.json"), "--data", p("test.tsv"), "--seed", "7",
         "--method", "map", "--out", p("mrf_map.pred")},
        {"infer", "--model", p("mrf.json"), "--backbone", p("bb.json"), "--data", p("test.tsv"), "--seed", "7",
         "--method", "exact", "--out", p("mrf_exact.pred")},
        {"eval", "--pred", p("ddn.pred"), "--data", p("test.tsv"), "--top-k", "2", "--out", p("report.json")},
    };
  };
  bool all_ran = true;
  for (const auto& dir : {a, b}) {
    std::streambuf* saved = std::cout.rdbuf();
    std::ostringstream sink;
    std::cout.rdbuf(sink.rdbuf());
    for (const auto& args : workflows(dir)) all_ran = all_ran && cli::run(args) == 0;
    std::cout.rdbuf(saved);
  }
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    ++compared;
    if (slurp(entry.path()) != slurp(b / entry.path().filename())) mismatches.push_back(entry.path().filename());
  }

  // Persistence: held-out CPLL of a jointly trained model survives save/load.
  const auto model = std::get<deep_dependency_network>(load_model(a / "ddn.json"));
  save_model(model, root / "copy.json");
  const auto back = std::get<deep_dependency_network>(load_model(root / "copy.json"));
  const double gap = std::abs(mean_cpll(model, test) - mean_cpll(back, test));
  fs::remove_all(root);

  out.pass = all_ran && mismatches.empty() && gap <= 1e-12;
  out.detail = std::string(all_ran ? "all workflows ran" : "a workflow FAILED") + ", " + std::to_string(compared) +
               " files compared, " + std::to_string(mismatches.size()) + " differ; held-out CPLL gap " +
               fmt("%.1e", gap);
  for (const auto& m : mismatches) out.detail += " [" + m + "]";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  struct criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<outcome()> run;
  };
  const std::vector<criterion> all{
      {1, "MRF inference oracle suite", 300, mrf_inference_suite},
      {2, "gradient suite", 120, gradient_suite},
      {3, "structure recovery", 60, structure_recovery},
      {4, "DDN inference consistency", 60, ddn_inference_consistency},
      {5, "metrics oracle", 30, metrics_oracle},
      {6, "XOR end-to-end directional check", 600, xor_directional},
      {7, "determinism and persistence", 0, determinism_and_persistence},
  };
  std::set<int> chosen;
  for (int i = 1; i < argc; ++i) chosen.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!chosen.empty() && !chosen.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_s <= 0 || secs <= c.limit_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("%s [%d] %s (%.1f s%s): %s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs,
                c.limit_s > 0 ? (" of " + fmt("%.0f", c.limit_s) + " s").c_str() : "", o.detail.c_str());
    std::fflush(stdout);
  }
  return failures ? 1 : 0;
}
