#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "ddn/dataset.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace ddn;
namespace fs = std::filesystem;

namespace {

struct workdir {
  fs::path root;
  workdir() {
    root = fs::temp_directory_path() / "ddn_cli_test";
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~workdir() { fs::remove_all(root); }
  std::string operator()(const std::string& name) const { return (root / name).string(); }
};

// x2 = x0 xor x1; v carries noisy copies of x0 and x1 plus one noise column.
dataset xor_data(std::uint64_t seed, std::size_t rows) {
  rng gen(seed);
  dataset d{3, 3, {}, {}};
  for (std::size_t r = 0; r < rows; ++r) {
    const std::uint8_t a = gen.bernoulli(0.5), b = gen.bernoulli(0.5);
    d.examples.push_back({"r" + std::to_string(r), {a + 0.3 * gen.normal(), b + 0.3 * gen.normal(), gen.normal()},
                          {a, b, static_cast<std::uint8_t>(a ^ b)}});
  }
  return d;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const std::string& path) {
  const auto s = slurp(path);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

int run(std::vector<std::string> args) { return cli::run(args); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("train and infer workflow") {
  workdir w;
  save_dataset(xor_data(1, 300), w("train.tsv"));
  save_dataset(xor_data(2, 10), w("test.tsv"));

  REQUIRE(run({"train", "backbone", "--data", w("train.tsv"), "--seed", "1", "--epochs", "5", "--out", w("b.json")}) ==
          0);
  CHECK(line_count(w("b.json.log")) == 5);

  SUBCASE("archives are bitwise reproducible") {
    REQUIRE(run({"train", "backbone", "--data", w("train.tsv"), "--seed", "1", "--epochs", "5", "--out",
                 w("b2.json")}) == 0);
    CHECK(slurp(w("b.json")) == slurp(w("b2.json")));
    CHECK(slurp(w("b.json.log")) == slurp(w("b2.json.log")));

    for (const char* jobs : {"1", "3"}) {
      REQUIRE(run({"train", "dn-pipeline", "--data", w("train.tsv"), "--backbone", w("b.json"), "--kind", "mlp",
                   "--hidden", "8,8", "--seed", "2", "--epochs", "3", "--jobs", jobs, "--out",
                   w(std::string("h") + jobs + ".json")}) == 0);
    }
    CHECK(slurp(w("h1.json")) == slurp(w("h3.json")));

    for (const char* name : {"m1.json", "m2.json"}) {
      REQUIRE(run({"train", "mrf", "--data", w("train.tsv"), "--seed", "3", "--epochs", "2", "--cap", "2", "--out",
                   w(name)}) == 0);
    }
    CHECK(slurp(w("m1.json")) == slurp(w("m2.json")));
  }

  SUBCASE("joint training needs both initial archives") {
    REQUIRE(run({"train", "dn-pipeline", "--data", w("train.tsv"), "--backbone", w("b.json"), "--seed", "2",
                 "--epochs", "3", "--out", w("h.json")}) == 0);
    CHECK(run({"train", "ddn-joint", "--data", w("train.tsv"), "--init-backbone", w("b.json"), "--seed", "4",
               "--out", w("j.json")}) == 2);
    CHECK(run({"train", "ddn-joint", "--data", w("train.tsv"), "--init-head", w("h.json"), "--seed", "4", "--out",
               w("j.json")}) == 2);
    CHECK(run({"train", "ddn-joint", "--data", w("train.tsv"), "--init-backbone", w("b.json"), "--init-head",
               w("h.json"), "--seed", "4", "--epochs", "2", "--lr", "0.1", "--out", w("j.json")}) == 2);
    REQUIRE(run({"train", "ddn-joint", "--data", w("train.tsv"), "--init-backbone", w("b.json"), "--init-head",
                 w("h.json"), "--seed", "4", "--epochs", "2", "--out", w("j.json")}) == 0);
    CHECK(line_count(w("j.json.log")) == 2);

    // DDN inference: 10 rows of n probabilities, reproducible and independent of --jobs.
    REQUIRE(run({"infer", "--model", w("j.json"), "--data", w("test.tsv"), "--samples", "1000", "--seed", "7",
                 "--out", w("p1.txt")}) == 0);
    REQUIRE(run({"infer", "--model", w("j.json"), "--data", w("test.tsv"), "--samples", "1000", "--seed", "7",
                 "--jobs", "4", "--out", w("p2.txt")}) == 0);
    CHECK(slurp(w("p1.txt")) == slurp(w("p2.txt")));
    const auto preds = cli::load_predictions(w("p1.txt"));
    CHECK(preds.n == 3);
    REQUIRE(preds.ids.size() == 10);
    for (const auto& row : preds.p) {
      for (double p : row) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
      }
    }
  }

  SUBCASE("map inference gives degenerate marginals") {
    REQUIRE(run({"train", "mrf", "--data", w("train.tsv"), "--backbone", w("b.json"), "--seed", "3", "--epochs", "2",
                 "--out", w("m.json")}) == 0);
    REQUIRE(run({"infer", "--model", w("m.json"), "--backbone", w("b.json"), "--data", w("test.tsv"), "--method",
                 "map", "--seed", "7", "--out", w("pm.txt")}) == 0);
    for (const auto& row : cli::load_predictions(w("pm.txt")).p) {
      for (double p : row) CHECK((p == 0.0 || p == 1.0));
    }
  }

  SUBCASE("usage errors") {
    CHECK(run({"infer", "--model", w("missing.json"), "--data", w("test.tsv"), "--seed", "1", "--out",
               w("x.txt")}) == 2);
    CHECK(run({"train", "backbone", "--data", w("train.tsv"), "--out", w("b3.json")}) == 2);  // no seed
    CHECK(run({"train", "backbone", "--data", w("train.tsv"), "--seed", "1", "--bogus", "1", "--out",
               w("b3.json")}) == 2);
    CHECK(run({"train"}) == 2);
    CHECK(run({"train", "backbone", "--data", w("nope.tsv"), "--seed", "1", "--out", w("b3.json")}) == 2);
  }

  SUBCASE("config precedence: defaults < config < flags") {
    write_text(w("cfg.json"), R"({"epochs": 3, "seed": 1, "hidden": [6, 5]})");
    REQUIRE(run({"train", "backbone", "--config", w("cfg.json"), "--data", w("train.tsv"), "--out", w("c1.json")}) == 0);
    CHECK(line_count(w("c1.json.log")) == 3);
    REQUIRE(run({"train", "backbone", "--config", w("cfg.json"), "--epochs", "4", "--data", w("train.tsv"), "--out",
                 w("c2.json")}) == 0);
    CHECK(line_count(w("c2.json.log")) == 4);
    const auto doc = nlohmann::json::parse(slurp(w("c1.json")));
    CHECK(doc.at("model_kind") == "backbone");
    write_text(w("bad.json"), R"({"epochs": 3, "seed": 1, "colour": "red"})");
    CHECK(run({"train", "backbone", "--config", w("bad.json"), "--data", w("train.tsv"), "--out", w("c3.json")}) == 2);
  }
}

TEST_CASE("eval") {
  workdir w;
  const auto data = xor_data(3, 40);
  save_dataset(data, w("d.tsv"));
  cli::predictions truth{3, {}, {}};
  cli::predictions soft{3, {}, {}};
  rng gen(4);
  for (const auto& ex : data.examples) {
    truth.ids.push_back(ex.id);
    truth.p.emplace_back(ex.x.begin(), ex.x.end());
    soft.ids.push_back(ex.id);
    vec row;
    for (auto b : ex.x) row.push_back(b ? 0.35 + 0.6 * gen.uniform() : 0.4 * gen.uniform());
    soft.p.push_back(row);
  }
  auto save = [&](const cli::predictions& p, const std::string& path) {
    std::ofstream out(path);
    cli::write_predictions(out, p);
  };
  save(truth, w("truth.txt"));
  save(soft, w("soft.txt"));

  SUBCASE("perfect predictions score 1 everywhere") {
    REQUIRE(run({"eval", "--pred", w("truth.txt"), "--data", w("d.tsv"), "--top-k", "1", "--out", w("r.json")}) == 0);
    const auto doc = nlohmann::json::parse(slurp(w("r.json")));
    for (const char* key : {"map", "lrap", "sa", "ji", "cp", "cr", "cf1", "op", "or", "of1"}) {
      CHECK(doc.at(key).get<double>() == 1.0);
    }
  }
  SUBCASE("threshold moves SA and JI only") {
    REQUIRE(run({"eval", "--pred", w("soft.txt"), "--data", w("d.tsv"), "--out", w("a.json")}) == 0);
    REQUIRE(run({"eval", "--pred", w("soft.txt"), "--data", w("d.tsv"), "--threshold", "0.3", "--out",
                 w("b.json")}) == 0);
    const auto a = nlohmann::json::parse(slurp(w("a.json")));
    const auto b = nlohmann::json::parse(slurp(w("b.json")));
    CHECK(a.at("map") == b.at("map"));
    CHECK(a.at("lrap") == b.at("lrap"));
    CHECK(a.at("sa") != b.at("sa"));
    CHECK(a.at("ji") != b.at("ji"));
  }
  SUBCASE("shape mismatch") {
    cli::predictions narrow{2, truth.ids, {}};
    for (const auto& row : truth.p) narrow.p.push_back({row[0], row[1]});
    save(narrow, w("narrow.txt"));
    CHECK(run({"eval", "--pred", w("narrow.txt"), "--data", w("d.tsv")}) == 2);
    cli::predictions fewer = truth;
    fewer.ids.pop_back();
    fewer.p.pop_back();
    save(fewer, w("fewer.txt"));
    CHECK(run({"eval", "--pred", w("fewer.txt"), "--data", w("d.tsv")}) == 2);
  }
  SUBCASE("predictions round trip without loss") {
    std::stringstream ss;
    cli::write_predictions(ss, soft);
    const auto back = cli::parse_predictions(ss);
    CHECK(back.ids == soft.ids);
    CHECK(back.p == soft.p);
  }
}
