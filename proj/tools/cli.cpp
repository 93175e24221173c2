#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "ddn/archive.hpp"
#include "ddn/dataset.hpp"
#include "ddn/ddn_model.hpp"
#include "ddn/metrics.hpp"
#include "json.hpp"

namespace ddn::cli {

namespace {

namespace fs = std::filesystem;

class usage_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// predictions format

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

predictions parse_predictions(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw format_error(1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  predictions preds;
  {
    constexpr std::string_view prefix = "#ddn-pred v1 n=";
    std::string_view h(line);
    if (h.substr(0, prefix.size()) != prefix) throw format_error(1, "expected '#ddn-pred v1 n=<n>'");
    h.remove_prefix(prefix.size());
    const auto [ptr, ec] = std::from_chars(h.data(), h.data() + h.size(), preds.n);
    if (ec != std::errc() || ptr != h.data() + h.size()) throw format_error(1, "bad label count");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 2) throw format_error(lineno, "expected <id>\\t<p_1,...,p_n>");
    vec p;
    if (preds.n > 0) {
      for (auto tok : split(fields[1], ',')) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty()) {
          throw format_error(lineno, "bad probability '" + std::string(tok) + "'");
        }
        p.push_back(v);
      }
    } else if (!fields[1].empty()) {
      throw format_error(lineno, "expected no probabilities for n=0");
    }
    if (p.size() != preds.n) {
      throw format_error(lineno, "expected " + std::to_string(preds.n) + " probabilities, got " +
                                     std::to_string(p.size()));
    }
    preds.ids.emplace_back(fields[0]);
    preds.p.push_back(std::move(p));
  }
  return preds;
}

predictions load_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open predictions file " + path.string());
  return parse_predictions(in);
}

void write_predictions(std::ostream& out, const predictions& preds) {
  out << "#ddn-pred v1 n=" << preds.n << '\n';
  for (std::size_t r = 0; r < preds.ids.size(); ++r) {
    out << preds.ids[r] << '\t';
    for (std::size_t i = 0; i < preds.p[r].size(); ++i) {
      if (i) out << ',';
      out << format_double(preds.p[r][i]);
    }
    out << '\n';
  }
}

namespace {

// ---------------------------------------------------------------------------
// shared plumbing

std::size_t default_jobs() {
  if (const char* env = std::getenv("DDN_JOBS")) {
    std::size_t j = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), j);
    if (ec == std::errc() && ptr == s.data() + s.size() && j > 0) return j;
  }
  return 1;
}

struct common_opts {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = default_jobs();
};

struct sgd_opts {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::vector<std::size_t> lr_steps;
  double lr_decay = 0.1;
  double l2 = 0.0;

  sgd_config to_config(std::uint64_t seed) const {
    sgd_config c;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.learning_rate = learning_rate;
    c.momentum = momentum;
    c.lr_steps = lr_steps;
    c.lr_decay = lr_decay;
    c.l2 = l2;
    c.seed = seed;
    return c;
  }
};

void add_common(CLI::App* app, common_opts& c, bool stochastic) {
  app->add_option("--config", c.config, "JSON file of option values (keys are long option names)");
  if (stochastic) app->add_option("--seed", c.seed, "Random seed (mandatory)");
  app->add_option("--jobs", c.jobs, "Worker threads (default from DDN_JOBS, else 1)");
}

void add_sgd(CLI::App* app, sgd_opts& s) {
  app->add_option("--epochs", s.epochs, "Training epochs");
  app->add_option("--batch-size", s.batch_size, "Mini-batch size");
  app->add_option("--lr", s.learning_rate, "Initial learning rate");
  app->add_option("--momentum", s.momentum, "Momentum");
  app->add_option("--lr-steps", s.lr_steps, "Epochs at which the rate is multiplied by --lr-decay")->delimiter(',');
  app->add_option("--lr-decay", s.lr_decay, "Step decay factor");
}

// Values from --config fill every option not given on the command line.
void apply_config(CLI::App* leaf, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw usage_error("cannot open config file " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw usage_error("config " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw usage_error("config " + path + ": expected a JSON object");
  for (const auto& [key, value] : doc.items()) {
    CLI::Option* opt = key == "config" ? nullptr : leaf->get_option_no_throw("--" + key);
    if (!opt) throw usage_error("config " + path + ": unknown key '" + key + "' for '" + leaf->get_name() + "'");
    if (opt->count() > 0) continue;
    auto as_text = [&](const nlohmann::json& v) {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_number_float()) return format_double(v.get<double>());
      if (v.is_number() || v.is_boolean()) return v.dump();
      throw usage_error("config " + path + ": unsupported value for '" + key + "'");
    };
    opt->clear();
    if (value.is_array()) {
      for (const auto& v : value) opt->add_result(as_text(v));
    } else {
      opt->add_result(as_text(value));
    }
    try {
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      throw usage_error("config " + path + ": bad value for '" + key + "': " + e.what());
    }
  }
}

std::uint64_t need_seed(const common_opts& c) {
  if (!c.seed) throw usage_error("--seed is required");
  return *c.seed;
}

const std::string& need(const std::string& value, const char* flag) {
  if (value.empty()) throw usage_error(std::string(flag) + " is required");
  return value;
}

dataset read_data(const std::string& path) {
  if (!fs::exists(path)) throw usage_error("dataset not found: " + path);
  return load_dataset(path);
}

model read_model(const std::string& path) {
  if (!fs::exists(path)) throw usage_error("model not found: " + path);
  return load_model(path);
}

template <class T>
T read_model_as(const std::string& path, const char* what) {
  auto m = read_model(path);
  if (!std::holds_alternative<T>(m)) {
    throw usage_error(path + ": expected a " + std::string(what) + " archive, found " + to_string(kind_of(m)));
  }
  return std::get<T>(std::move(m));
}

void write_log(const std::string& path, const vec& losses) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write log " + path);
  for (std::size_t k = 0; k < losses.size(); ++k) out << k + 1 << '\t' << format_double(losses[k]) << '\n';
}

void write_archive(const model& m, const std::string& out, const std::string& log, const vec& losses) {
  save_model(m, out);
  write_log(log.empty() ? out + ".log" : log, losses);
}

// Evidence for each example: N(v) when a backbone is given, else v itself.
std::vector<vec> evidence_for(const dataset& data, const std::optional<backbone>& bb) {
  if (!bb) return data.features();
  if (bb->input_dim() != data.d) {
    throw std::invalid_argument("backbone expects d=" + std::to_string(bb->input_dim()) + ", dataset has d=" +
                                std::to_string(data.d));
  }
  return bb->forward_all(data);
}

std::optional<backbone> optional_backbone(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return read_model_as<backbone>(path, "backbone");
}

std::vector<std::size_t> hidden_or(const std::vector<std::size_t>& given, std::vector<std::size_t> fallback) {
  return given.empty() ? fallback : given;
}

template <class F>
void parallel_for(std::size_t count, std::size_t jobs, F&& body) {
  const std::size_t nthreads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
  if (nthreads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < nthreads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// train

struct backbone_cmd {
  common_opts common;
  sgd_opts sgd;
  std::string data, out, log;
  std::vector<std::size_t> hidden;

  void attach(CLI::App* app) {
    add_common(app, common, true);
    add_sgd(app, sgd);
    app->add_option("--data", data, "Training dataset");
    app->add_option("--out", out, "Output archive");
    app->add_option("--log", log, "Loss log (default <out>.log)");
    app->add_option("--hidden", hidden, "Hidden widths (default 4*max(d,n))")->delimiter(',');
    app->add_option("--l2", sgd.l2, "Weight decay");
  }

  void run() {
    const auto seed = need_seed(common);
    const auto ds = read_data(need(data, "--data"));
    need(out, "--out");
    const auto init = backbone::make(ds.d, hidden_or(hidden, backbone::default_hidden(ds.d, ds.n)), ds.n,
                                     rng::derive(seed, "backbone-init").next_u64());
    const auto res = pretrain_backbone(init, ds, sgd.to_config(seed));
    write_archive(res.model, out, log, res.epoch_loss);
  }
};

struct pipeline_cmd {
  common_opts common;
  sgd_opts sgd;
  std::string data, out, log, backbone_path, kind = "lr";
  std::vector<std::size_t> hidden;
  double reg = 0.01;

  void attach(CLI::App* app) {
    add_common(app, common, true);
    add_sgd(app, sgd);
    app->add_option("--data", data, "Training dataset");
    app->add_option("--out", out, "Output archive");
    app->add_option("--log", log, "Loss log (default <out>.log); mean over classifiers per epoch");
    app->add_option("--backbone", backbone_path, "Frozen backbone giving e = N(v) (default e = v)");
    app->add_option("--kind", kind, "Classifier kind")->check(CLI::IsMember({"lr", "mlp"}));
    app->add_option("--reg", reg, "l1 strength (lr) or l2 strength (mlp)");
    app->add_option("--hidden", hidden, "MLP hidden widths (default four of max(2(m+n),64))")->delimiter(',');
  }

  void run() {
    const auto seed = need_seed(common);
    const auto ds = read_data(need(data, "--data"));
    need(out, "--out");
    const auto bb = optional_backbone(backbone_path);
    labeled_features lf{evidence_for(ds, bb), ds.labels()};
    const std::size_t m_dim = bb ? bb->output_dim() : ds.d;
    const auto init = kind == "lr" ? conditional_dn::make_lr(ds.n, m_dim, reg)
                                   : conditional_dn::make_mlp(ds.n, m_dim,
                                                              hidden_or(hidden, conditional_dn::default_hidden(m_dim, ds.n)),
                                                              reg, rng::derive(seed, "dn-init").next_u64());
    const auto res = train_pipeline(init, lf, sgd.to_config(seed), common.jobs);
    vec curve(sgd.epochs, 0.0);
    for (const auto& c : res.epoch_loss) {
      for (std::size_t k = 0; k < c.size() && k < curve.size(); ++k) curve[k] += c[k] / static_cast<double>(ds.n);
    }
    write_archive(res.dn, out, log, curve);
  }
};

struct joint_cmd {
  common_opts common;
  sgd_opts sgd;
  std::string data, out, log, init_backbone, init_head;

  void attach(CLI::App* app) {
    sgd.learning_rate = 1e-4;
    add_common(app, common, true);
    add_sgd(app, sgd);
    app->add_option("--data", data, "Training dataset");
    app->add_option("--out", out, "Output archive");
    app->add_option("--log", log, "Loss log (default <out>.log); mean CPLL per epoch");
    app->add_option("--init-backbone", init_backbone, "Pretrained backbone archive");
    app->add_option("--init-head", init_head, "Pipeline-trained DN archive");
    app->add_option("--l2", sgd.l2, "Backbone weight decay");
  }

  void run() {
    need(init_backbone, "--init-backbone");
    need(init_head, "--init-head");
    const auto seed = need_seed(common);
    const auto ds = read_data(need(data, "--data"));
    need(out, "--out");
    deep_dependency_network init{read_model_as<backbone>(init_backbone, "backbone"),
                                 read_model_as<conditional_dn>(init_head, "dn")};
    try {
      init.validate();
    } catch (const std::invalid_argument& e) {
      throw usage_error(std::string("initial backbone and head disagree: ") + e.what());
    }
    const auto res = train_joint(init, ds, sgd.to_config(seed));
    write_archive(res.model, out, log, res.epoch_loss);
  }
};

struct mrf_cmd {
  common_opts common;
  sgd_opts sgd;
  std::string data, out, log, backbone_path;
  std::size_t cap = 10;
  double tau_e = 0.5;
  vec lambdas;

  void attach(CLI::App* app) {
    sgd.learning_rate = 0.1;
    add_common(app, common, true);
    add_sgd(app, sgd);
    app->add_option("--data", data, "Training dataset");
    app->add_option("--out", out, "Output archive");
    app->add_option("--log", log, "Loss log (default <out>.log); negative PLL per epoch");
    app->add_option("--backbone", backbone_path, "Backbone giving e = N(v) (default e = v)");
    app->add_option("--cap", cap, "Neighbour cap per node")->check(CLI::Range(2, 10));
    app->add_option("--tau-e", tau_e, "Evidence binarization threshold (e > tau)");
    app->add_option("--lambdas", lambdas, "l1 schedule for structure learning (default doubles from max(0.001, sqrt(ln p / rows)) to 10)")
        ->delimiter(',');
    app->add_option("--l2", sgd.l2, "l2 penalty on PLL");
  }

  void run() {
    const auto seed = need_seed(common);
    const auto ds = read_data(need(data, "--data"));
    need(out, "--out");
    const auto e = evidence_for(ds, optional_backbone(backbone_path));
    const std::size_t n_e = e.empty() ? 0 : e.front().size();
    binary_matrix rows(ds.size(), ds.n + n_e);
    for (std::size_t r = 0; r < ds.size(); ++r) {
      for (std::size_t j = 0; j < ds.n; ++j) rows.at(r, j) = ds.examples[r].x[j];
      const auto bits = binarize(e[r], tau_e);
      for (std::size_t j = 0; j < n_e; ++j) rows.at(r, ds.n + j) = bits[j];
    }
    structure_config sc;
    sc.neighbor_cap = cap;
    if (!lambdas.empty()) sc.lambda_schedule = lambdas;
    const auto structure = learn_structure(rows, sc);
    for (const auto& w : structure.warnings) std::cerr << "warning: " << w << '\n';
    const auto res = fit_weights(mrf_from_structure(ds.n, n_e, structure.edges, cap), rows, sgd.to_config(seed));
    vec loss(res.epoch_pll.size());
    std::transform(res.epoch_pll.begin(), res.epoch_pll.end(), loss.begin(), [](double v) { return -v; });
    write_archive(res.mrf, out, log, loss);
  }
};

// ---------------------------------------------------------------------------
// infer

struct infer_cmd {
  common_opts common;
  std::string model_path, data, out, bits_out, backbone_path, method = "gibbs", map_mode_name = "exact";
  std::optional<std::size_t> samples;
  std::size_t burn_in = 0;
  std::size_t i_bound = 3;
  double tau_e = 0.5;
  double threshold = 0.5;
  std::size_t time_budget_ms = 60000;

  void attach(CLI::App* app) {
    add_common(app, common, true);
    app->add_option("--model", model_path, "Model archive");
    app->add_option("--data", data, "Dataset to label");
    app->add_option("--out", out, "Predictions file of marginals");
    app->add_option("--bits-out", bits_out, "Optional predictions file of thresholded 0/1 labels");
    app->add_option("--threshold", threshold, "Threshold for --bits-out (p > threshold)")->check(CLI::Range(0.0, 1.0));
    app->add_option("--backbone", backbone_path, "Backbone for dn/mrf models (default e = v)");
    app->add_option("--method", method, "mrf inference routine; dn/ddn always use gibbs")
        ->check(CLI::IsMember({"gibbs", "bp", "map", "exact"}));
    app->add_option("--samples", samples, "Gibbs samples (default 1000 for dn/ddn, 50000 for mrf)");
    app->add_option("--burn-in", burn_in, "Gibbs burn-in sweeps");
    app->add_option("--i-bound", i_bound, "Cluster scope bound for bp");
    app->add_option("--map-mode", map_mode_name, "MAP search")->check(CLI::IsMember({"exact", "icm"}));
    app->add_option("--tau-e", tau_e, "Evidence binarization threshold for mrf models");
    app->add_option("--time-budget-ms", time_budget_ms, "Per-example time budget for mrf routines");
  }

  void run() {
    const auto seed = need_seed(common);
    const auto m = read_model(need(model_path, "--model"));
    const auto ds = read_data(need(data, "--data"));
    need(out, "--out");
    const auto bb = optional_backbone(backbone_path);

    predictions preds;
    preds.ids.resize(ds.size());
    preds.p.resize(ds.size());
    std::function<vec(std::size_t, rng&)> one;

    ddn_inference_config dcfg;
    if (samples) dcfg.n_samples = *samples;
    dcfg.burn_in = burn_in;
    if (method != "gibbs" && !std::holds_alternative<pairwise_mrf>(m)) {
      throw usage_error("--method " + method + " applies to mrf models only");
    }

    std::vector<vec> e;
    if (const auto* ddn = std::get_if<deep_dependency_network>(&m)) {
      if (bb) throw usage_error("--backbone does not apply to ddn models");
      if (ddn->bb.input_dim() != ds.d || ddn->head.n != ds.n) throw std::invalid_argument("model and dataset disagree");
      preds.n = ddn->head.n;
      one = [&, ddn](std::size_t r, rng& gen) { return infer(*ddn, ds.examples[r].v, dcfg, gen).p; };
    } else if (const auto* dn = std::get_if<conditional_dn>(&m)) {
      e = evidence_for(ds, bb);
      if (dn->n != ds.n || (!e.empty() && e.front().size() != dn->m)) {
        throw std::invalid_argument("model and dataset disagree");
      }
      preds.n = dn->n;
      one = [&, dn](std::size_t r, rng& gen) { return infer_from_evidence(*dn, e[r], dcfg, gen).p; };
    } else if (const auto* mrf = std::get_if<pairwise_mrf>(&m)) {
      e = evidence_for(ds, bb);
      if (mrf->n_x() != ds.n || (!e.empty() && e.front().size() != mrf->n_e())) {
        throw std::invalid_argument("model and dataset disagree");
      }
      drf_config cfg;
      cfg.method = method == "gibbs" ? inference_method::gibbs
                   : method == "bp"  ? inference_method::bp
                   : method == "map" ? inference_method::map
                                     : inference_method::exact;
      cfg.tau_e = tau_e;
      if (samples) cfg.gibbs.n_samples = *samples;
      cfg.gibbs.burn_in = burn_in;
      cfg.bp.i_bound = i_bound;
      cfg.map.mode = map_mode_name == "icm" ? map_mode::icm : map_mode::exact;
      cfg.gibbs.time_budget = cfg.bp.time_budget = cfg.map.time_budget = millis(time_budget_ms);
      preds.n = mrf->n_x();
      one = [&, mrf, cfg](std::size_t r, rng& gen) { return drf_predict(*mrf, e[r], cfg, gen).marginals.p; };
    } else {
      // A backbone trained with one output per label is the independent baseline.
      const auto& net = std::get<backbone>(m);
      if (bb) throw usage_error("--backbone does not apply to backbone models");
      if (net.input_dim() != ds.d || net.output_dim() != ds.n) throw std::invalid_argument("model and dataset disagree");
      preds.n = ds.n;
      one = [&](std::size_t r, rng&) { return net.forward(ds.examples[r].v); };
    }

    parallel_for(ds.size(), common.jobs, [&](std::size_t r) {
      rng gen = rng::derive(seed, "infer", r);
      preds.ids[r] = ds.examples[r].id;
      preds.p[r] = one(r, gen);
    });

    std::ofstream o(out);
    if (!o) throw std::runtime_error("cannot write " + out);
    write_predictions(o, preds);
    if (!bits_out.empty()) {
      predictions bits = preds;
      for (auto& row : bits.p) {
        for (auto& v : row) v = v > threshold ? 1.0 : 0.0;
      }
      std::ofstream b(bits_out);
      if (!b) throw std::runtime_error("cannot write " + bits_out);
      write_predictions(b, bits);
    }
  }
};

// ---------------------------------------------------------------------------
// eval

struct eval_cmd {
  common_opts common;
  std::string pred, data, out;
  double threshold = 0.5;
  std::optional<std::size_t> top_k;

  void attach(CLI::App* app) {
    add_common(app, common, false);
    app->add_option("--pred", pred, "Predictions file");
    app->add_option("--data", data, "Dataset with the true labels");
    app->add_option("--threshold", threshold, "Threshold for SA, JI and precision/recall")
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--top-k", top_k, "Also report precision/recall for the top k labels");
    app->add_option("--out", out, "Write the report as a flat JSON object");
  }

  void run() {
    if (!fs::exists(need(pred, "--pred"))) throw usage_error("predictions not found: " + pred);
    const auto preds = load_predictions(pred);
    const auto ds = read_data(need(data, "--data"));
    if (preds.n != ds.n) {
      throw usage_error("predictions have n=" + std::to_string(preds.n) + ", dataset has n=" + std::to_string(ds.n));
    }
    if (preds.ids.size() != ds.size()) {
      throw usage_error("predictions have " + std::to_string(preds.ids.size()) + " rows, dataset has " +
                        std::to_string(ds.size()));
    }
    std::map<std::string_view, std::size_t> row_of;
    for (std::size_t r = 0; r < preds.ids.size(); ++r) {
      if (!row_of.emplace(preds.ids[r], r).second) throw usage_error("duplicate prediction id " + preds.ids[r]);
    }
    score_matrix scores(ds.size(), ds.n);
    for (std::size_t r = 0; r < ds.size(); ++r) {
      const auto it = row_of.find(ds.examples[r].id);
      if (it == row_of.end()) throw usage_error("no prediction for id " + ds.examples[r].id);
      std::copy(preds.p[it->second].begin(), preds.p[it->second].end(), scores.values.begin() + r * ds.n);
    }
    if (top_k && (*top_k == 0 || *top_k > ds.n)) throw usage_error("--top-k must lie in [1, n]");
    const auto report = evaluate(scores, ds.labels(), threshold, top_k);
    for (auto l : report.skipped_labels) std::cerr << "warning: label " << l << " has no positives; skipped in map\n";
    std::cout << report.to_text();
    if (!out.empty()) {
      nlohmann::ordered_json doc;
      for (const auto& [k, v] : report.entries()) doc[k] = v;
      std::ofstream o(out);
      if (!o) throw std::runtime_error("cannot write " + out);
      o << doc.dump(2) << '\n';
    }
  }
};

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Multi-label classification with deep random fields and deep dependency networks", "ddn"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  backbone_cmd backbone_c;
  pipeline_cmd pipeline_c;
  joint_cmd joint_c;
  mrf_cmd mrf_c;
  infer_cmd infer_c;
  eval_cmd eval_c;

  auto* train = app.add_subcommand("train", "Train a model and write an archive plus a loss log");
  train->require_subcommand(1);
  auto* t_backbone = train->add_subcommand("backbone", "Pretrain a backbone N: v -> e with one output per label");
  auto* t_pipeline = train->add_subcommand("dn-pipeline", "Train the per-label classifiers independently");
  auto* t_joint = train->add_subcommand("ddn-joint", "Jointly fine-tune a pretrained backbone and head on CPLL");
  auto* t_mrf = train->add_subcommand("mrf", "Learn MRF structure (l1) and weights (PLL)");
  auto* infer = app.add_subcommand("infer", "Write per-example label marginals");
  auto* eval = app.add_subcommand("eval", "Score predictions against a dataset");

  backbone_c.attach(t_backbone);
  pipeline_c.attach(t_pipeline);
  joint_c.attach(t_joint);
  mrf_c.attach(t_mrf);
  infer_c.attach(infer);
  eval_c.attach(eval);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (t_backbone->parsed()) {
      apply_config(t_backbone, backbone_c.common.config);
      backbone_c.run();
    } else if (t_pipeline->parsed()) {
      apply_config(t_pipeline, pipeline_c.common.config);
      pipeline_c.run();
    } else if (t_joint->parsed()) {
      apply_config(t_joint, joint_c.common.config);
      joint_c.run();
    } else if (t_mrf->parsed()) {
      apply_config(t_mrf, mrf_c.common.config);
      mrf_c.run();
    } else if (infer->parsed()) {
      apply_config(infer, infer_c.common.config);
      infer_c.run();
    } else if (eval->parsed()) {
      apply_config(eval, eval_c.common.config);
      eval_c.run();
    }
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const format_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const archive_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace ddn::cli
