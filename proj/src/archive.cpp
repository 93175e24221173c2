#include "ddn/archive.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ddn {

using json = nlohmann::json;

std::string to_string(model_kind k) {
  switch (k) {
    case model_kind::mrf: return "mrf";
    case model_kind::dn_lr: return "dn_lr";
    case model_kind::dn_mlp: return "dn_mlp";
    case model_kind::ddn: return "ddn";
    case model_kind::backbone: return "backbone";
  }
  return "unknown";
}

model_kind model_kind_from_string(const std::string& s) {
  if (s == "mrf") return model_kind::mrf;
  if (s == "dn_lr") return model_kind::dn_lr;
  if (s == "dn_mlp") return model_kind::dn_mlp;
  if (s == "ddn") return model_kind::ddn;
  if (s == "backbone") return model_kind::backbone;
  throw archive_error("unknown model_kind '" + s + "'");
}

model_kind kind_of(const model& m) {
  struct visitor {
    model_kind operator()(const pairwise_mrf&) const { return model_kind::mrf; }
    model_kind operator()(const conditional_dn& dn) const {
      return dn.kind() == classifier_kind::lr ? model_kind::dn_lr : model_kind::dn_mlp;
    }
    model_kind operator()(const deep_dependency_network&) const { return model_kind::ddn; }
    model_kind operator()(const backbone&) const { return model_kind::backbone; }
  };
  return std::visit(visitor{}, m);
}

namespace {

json net_to_json(const dense_net& net) { return {{"sizes", net.sizes()}, {"params", net.params()}}; }

dense_net net_from_json(const json& j) {
  dense_net net(j.at("sizes").get<std::vector<std::size_t>>());
  auto params = j.at("params").get<vec>();
  if (params.size() != net.param_count()) throw archive_error("network parameter count does not match its sizes");
  net.params() = std::move(params);
  return net;
}

json dn_to_json(const conditional_dn& dn) {
  json cls = json::array();
  for (const auto& c : dn.classifiers) {
    cls.push_back({{"kind", to_string(c.kind())}, {"reg", c.reg()}, {"net", net_to_json(c.net())}});
  }
  return {{"classifiers", cls}};
}

conditional_dn dn_from_json(const json& j, std::size_t n, std::size_t m) {
  conditional_dn dn{n, m, {}};
  for (const auto& c : j.at("classifiers")) {
    const auto kind_s = c.at("kind").get<std::string>();
    if (kind_s != "lr" && kind_s != "mlp") throw archive_error("unknown classifier kind '" + kind_s + "'");
    const auto kind = kind_s == "lr" ? classifier_kind::lr : classifier_kind::mlp;
    dn.classifiers.emplace_back(kind, net_from_json(c.at("net")), c.at("reg").get<double>());
  }
  try {
    dn.validate();
  } catch (const std::invalid_argument& e) {
    throw archive_error(std::string("dimension mismatch: ") + e.what());
  }
  return dn;
}

json mrf_to_json(const pairwise_mrf& mrf) {
  json feats = json::array();
  for (const auto& f : mrf.features()) {
    feats.push_back(f.is_pair() ? json::array({f.a, f.b}) : json::array({f.a}));
  }
  return {{"n_x", mrf.n_x()},
          {"n_e", mrf.n_e()},
          {"neighbor_cap", mrf.neighbor_cap()},
          {"features", feats},
          {"weights", mrf.weights()}};
}

pairwise_mrf mrf_from_json(const json& j) {
  pairwise_mrf mrf(j.at("n_x").get<std::size_t>(), j.at("n_e").get<std::size_t>(),
                   j.at("neighbor_cap").get<std::size_t>());
  const auto& feats = j.at("features");
  const auto weights = j.at("weights").get<vec>();
  if (weights.size() != feats.size()) throw archive_error("mrf: one weight per feature required");
  try {
    for (std::size_t k = 0; k < feats.size(); ++k) {
      const auto nodes = feats[k].get<std::vector<std::size_t>>();
      if (nodes.size() == 1) {
        mrf.add_unary(nodes[0], weights[k]);
      } else if (nodes.size() == 2) {
        mrf.add_pair(nodes[0], nodes[1], weights[k]);
      } else {
        throw archive_error("mrf: features have one or two nodes");
      }
    }
  } catch (const std::logic_error& e) {
    throw archive_error(std::string("mrf: ") + e.what());
  }
  return mrf;
}

struct dims {
  std::size_t d = 0, m = 0, n = 0;
};

dims dims_of(const model& mdl) {
  struct visitor {
    dims operator()(const pairwise_mrf& x) const { return {0, x.n_e(), x.n_x()}; }
    dims operator()(const conditional_dn& x) const { return {0, x.m, x.n}; }
    dims operator()(const deep_dependency_network& x) const { return {x.bb.input_dim(), x.head.m, x.head.n}; }
    dims operator()(const backbone& x) const { return {x.input_dim(), x.output_dim(), x.output_dim()}; }
  };
  return std::visit(visitor{}, mdl);
}

}  // namespace

std::string serialize_model(const model& mdl) {
  const dims dm = dims_of(mdl);
  json payload;
  if (const auto* p = std::get_if<pairwise_mrf>(&mdl)) {
    payload = mrf_to_json(*p);
  } else if (const auto* p = std::get_if<conditional_dn>(&mdl)) {
    payload = dn_to_json(*p);
  } else if (const auto* p = std::get_if<deep_dependency_network>(&mdl)) {
    payload = {{"backbone", net_to_json(p->bb.net)}, {"head", dn_to_json(p->head)}};
  } else {
    payload = {{"backbone", net_to_json(std::get<backbone>(mdl).net)}};
  }
  json doc = {{"format_version", archive_format_version},
              {"model_kind", to_string(kind_of(mdl))},
              {"dims", {{"d", dm.d}, {"m", dm.m}, {"n", dm.n}}},
              {"payload", payload}};
  return doc.dump(1) + "\n";
}

model deserialize_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw archive_error(std::string("truncated or malformed archive: ") + e.what());
  }
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != archive_format_version) {
      throw archive_error("unsupported format_version " + std::to_string(version) + " (expected " +
                          std::to_string(archive_format_version) + ")");
    }
    const auto kind = model_kind_from_string(doc.at("model_kind").get<std::string>());
    const auto& jd = doc.at("dims");
    const dims want{jd.at("d").get<std::size_t>(), jd.at("m").get<std::size_t>(), jd.at("n").get<std::size_t>()};
    const auto& payload = doc.at("payload");
    model out;
    switch (kind) {
      case model_kind::mrf:
        out = mrf_from_json(payload);
        break;
      case model_kind::dn_lr:
      case model_kind::dn_mlp:
        out = dn_from_json(payload, want.n, want.m);
        break;
      case model_kind::ddn: {
        deep_dependency_network net{backbone{net_from_json(payload.at("backbone"))},
                                    dn_from_json(payload.at("head"), want.n, want.m)};
        try {
          net.validate();
        } catch (const std::invalid_argument& e) {
          throw archive_error(std::string("dimension mismatch: ") + e.what());
        }
        out = std::move(net);
        break;
      }
      case model_kind::backbone:
        out = backbone{net_from_json(payload.at("backbone"))};
        break;
    }
    const dims got = dims_of(out);
    if (kind_of(out) != kind) throw archive_error("model_kind does not match the payload");
    if (got.d != want.d || got.m != want.m || got.n != want.n) {
      throw archive_error("dimension mismatch between dims and payload");
    }
    return out;
  } catch (const json::exception& e) {
    throw archive_error(std::string("malformed archive: ") + e.what());
  }
}

void save_model(const model& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw archive_error("cannot write archive '" + path.string() + "'");
  out << serialize_model(m);
  if (!out) throw archive_error("failed writing archive '" + path.string() + "'");
}

model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw archive_error("cannot open archive '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace ddn
