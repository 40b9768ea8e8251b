#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "app/commands.hpp"
#include "app/synthetic.hpp"
#include "fixtures.hpp"
#include "stackcast/dataframe.hpp"
#include "stackcast/gbdt/booster.hpp"

using namespace stackcast;
using namespace stackcast::app;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("stackcast_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void spit(const fs::path& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "stackcast");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// Small models on a short series keep every command under a second or two.
fs::path quick_config(const fs::path& dir) {
  const json doc{{"version", 1},
                 {"synthetic", {{"n_points", 160}, {"period", 20.0}, {"noise", 0.5}}},
                 {"lookback", 5},
                 {"seed", 42},
                 {"gbdt_oblivious", {{"n_iterations", 20}}},
                 {"gbdt_leafwise", {{"n_iterations", 20}}},
                 {"lstm", {{"hidden_size", 4}, {"epochs", 10}}},
                 {"ensemble", {{"k_folds", 3}, {"meta", {{"hidden_size", 4}, {"epochs", 5}}}}}};
  const fs::path path = dir / "config.json";
  spit(path, doc.dump(2));
  return path;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_SUITE("gen-synthetic") {
  TEST_CASE("a pure quarter-period sine cycles exactly") {
    SyntheticSpec spec;
    spec.n_points = 12;
    spec.offset = 50.0;
    spec.trend = 0.0;
    spec.noise = 0.0;
    spec.amplitude = 1.0;
    spec.period = 4.0;
    const auto frame = data::parse_csv(synthetic_csv(spec), data::default_schema());
    const double cycle[] = {50.0, 51.0, 50.0, 49.0};
    for (std::size_t t = 0; t < 12; ++t) CHECK(frame.column("close")[t] == cycle[t % 4]);
  }

  TEST_CASE("the default file has a header and 500 rows, identical across runs") {
    const auto dir = fresh_dir("gen");
    REQUIRE(cli({"gen-synthetic", "--out", dir.string(), "--name", "a.csv"}).code == 0);
    REQUIRE(cli({"gen-synthetic", "--out", dir.string(), "--name", "b.csv"}).code == 0);
    const std::string a = slurp(dir / "a.csv");
    CHECK(lines_of(a).size() == 501);
    CHECK(a == slurp(dir / "b.csv"));
    CHECK(lines_of(a).front() == "date,open,high,low,close,volume");
  }

  TEST_CASE("the bundled fixture is the default seed-42 series") {
    CHECK(slurp(stackcast::testing::fixture_path("synthetic_500.csv")) == synthetic_csv(SyntheticSpec{}));
  }

  TEST_CASE("generated frames are valid price data") {
    const auto frame = generate_synthetic(SyntheticSpec{});
    for (std::size_t t = 0; t < frame.rows(); ++t) {
      CHECK(frame.column("low")[t] <= std::min(frame.column("open")[t], frame.column("close")[t]));
      CHECK(frame.column("high")[t] >= std::max(frame.column("open")[t], frame.column("close")[t]));
      CHECK(frame.column("volume")[t] > 0.0);
    }
  }
}

TEST_SUITE("train") {
  TEST_CASE("train writes a manifest and a model that round-trips") {
    const auto dir = fresh_dir("train");
    const auto r = cli({"train", "--config", quick_config(dir).string(), "--model", "gbdt-leafwise", "--out",
                        (dir / "run").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto manifest = json::parse(slurp(dir / "run" / "manifest.json"));
    CHECK(manifest.at("seed") == 42);
    CHECK(manifest.at("config_hash").get<std::string>().size() == 16);
    CHECK(manifest.at("wallclock").contains("total_seconds"));
    const std::string doc = slurp(dir / "run" / "gbdt-leafwise.model.json");
    CHECK(gbdt::save_gbdt(gbdt::load_gbdt(doc)) == doc);
    CHECK(fs::exists(dir / "run" / "data.csv"));
  }

  TEST_CASE("rerunning train gives byte-identical model files") {
    const auto dir = fresh_dir("rerun");
    const auto config = quick_config(dir).string();
    REQUIRE(cli({"train", "--config", config, "--model", "lstm", "--out", (dir / "a").string()}).code == 0);
    REQUIRE(cli({"train", "--config", config, "--model", "lstm", "--out", (dir / "b").string()}).code == 0);
    for (const char* f : {"lstm.json", "lstm.model.json", "lstm.predictions.csv"}) {
      CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    auto ma = json::parse(slurp(dir / "a" / "manifest.json"));
    auto mb = json::parse(slurp(dir / "b" / "manifest.json"));
    ma.erase("wallclock");
    mb.erase("wallclock");
    CHECK(ma == mb);
  }

  TEST_CASE("a missing data file exits 1 and names the path") {
    const auto r = cli({"train", "--data", "/no/such/prices.csv", "--seed", "1", "--out", "/tmp/unused"});
    CHECK(r.code == 1);
    CHECK(r.err.find("/no/such/prices.csv") != std::string::npos);
  }

  TEST_CASE("config problems exit 2") {
    const auto dir = fresh_dir("badconfig");
    spit(dir / "broken.json", "{\"version\": 1,");
    spit(dir / "unknown.json", R"({"version": 1, "lookbak": 4})");
    spit(dir / "noversion.json", R"({"lookback": 4})");
    spit(dir / "seeded.json", R"({"version": 1, "lstm": {"seed": 3}})");
    for (const char* name : {"broken.json", "unknown.json", "noversion.json", "seeded.json"}) {
      CHECK_MESSAGE(cli({"train", "--config", (dir / name).string(), "--synthetic", "--seed", "1"}).code == 2, name);
    }
    CHECK(cli({"train", "--config", (dir / "absent.json").string()}).code == 2);
    CHECK(cli({"train", "--synthetic"}).code == 2);
    CHECK(cli({"train", "--synthetic", "--seed", "1", "--model", "arima"}).code == 2);
    CHECK(cli({"train", "--synthetic", "--seed", "1", "--train-fraction", "1.5"}).code == 2);
    CHECK(cli({"train", "--bogus-flag"}).code == 2);
    CHECK(cli({}).code == 2);
  }

  TEST_CASE("flags override config values") {
    const auto dir = fresh_dir("override");
    RunConfig config = load_run_config(quick_config(dir).string());
    CHECK(config.lookback == 5);
    const auto r = cli({"train", "--config", quick_config(dir).string(), "--model", "gbdt-oblivious", "--lookback",
                        "7", "--seed", "9", "--out", (dir / "run").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto manifest = json::parse(slurp(dir / "run" / "manifest.json"));
    CHECK(manifest.at("config").at("lookback") == 7);
    CHECK(manifest.at("seed") == 9);
    CHECK(manifest.at("config").at("ensemble").at("meta_window") == 7);
  }
}

TEST_SUITE("compare") {
  TEST_CASE("compare ranks four models by r2") {
    const auto dir = fresh_dir("compare");
    const auto r = cli({"compare", "--config", quick_config(dir).string(), "--out", (dir / "run").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto lines = lines_of(slurp(dir / "run" / "comparison.csv"));
    REQUIRE(lines.size() == 5);
    CHECK(lines[0] == "model,r2,mae,mse,rmse,n");
    double previous = 2.0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const auto comma = lines[i].find(',');
      const double r2 = std::stod(lines[i].substr(comma + 1));
      CHECK(r2 <= previous);
      previous = r2;
    }
    const auto manifest = json::parse(slurp(dir / "run" / "manifest.json"));
    CHECK(manifest.at("improvement").contains("r2_gain"));
  }

  TEST_CASE("a failing model becomes an ERROR row and the rest proceed") {
    const auto dir = fresh_dir("compare_fail");
    auto doc = json::parse(slurp(quick_config(dir)));
    doc["ensemble"]["k_folds"] = 1000;
    spit(dir / "config.json", doc.dump());
    const auto r = cli({"compare", "--config", (dir / "config.json").string(), "--models", "lstm,gbdt-leafwise",
                        "--out", (dir / "run").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto lines = lines_of(slurp(dir / "run" / "comparison.csv"));
    REQUIRE(lines.size() == 4);
    CHECK(lines[3] == "ensemble,ERROR,ERROR,ERROR,ERROR,0");
    CHECK(fs::exists(dir / "run" / "lstm.model.json"));
    CHECK_FALSE(fs::exists(dir / "run" / "ensemble.model.json"));
    CHECK(json::parse(slurp(dir / "run" / "manifest.json")).at("improvement").is_null());
  }

  TEST_CASE("compare output does not depend on the thread count") {
    const auto dir = fresh_dir("threads");
    const auto config = quick_config(dir).string();
    REQUIRE(cli({"compare", "--config", config, "--out", (dir / "one").string()}).code == 0);
    REQUIRE(cli({"compare", "--config", config, "--threads", "4", "--out", (dir / "four").string()}).code == 0);
    for (const auto& entry : fs::directory_iterator(dir / "one")) {
      const auto name = entry.path().filename();
      if (name == "manifest.json") continue;
      CHECK_MESSAGE(slurp(entry.path()) == slurp(dir / "four" / name), name.string());
    }
  }
}

TEST_SUITE("predict") {
  TEST_CASE("predicting the training data reproduces in-run predictions") {
    const auto dir = fresh_dir("predict");
    REQUIRE(cli({"compare", "--config", quick_config(dir).string(), "--models", "lstm,gbdt-oblivious", "--out",
                 (dir / "run").string()})
                .code == 0);
    for (const char* model : {"lstm", "gbdt-oblivious", "ensemble"}) {
      const std::string pipeline = (dir / "run" / (std::string(model) + ".json")).string();
      const auto r = cli({"predict", "--model", pipeline, "--data", (dir / "run" / "data.csv").string(), "--out",
                          (dir / "pred").string()});
      REQUIRE_MESSAGE(r.code == 0, r.err);
      const std::string file = std::string(model) + ".predictions.csv";
      CHECK_MESSAGE(slurp(dir / "pred" / file) == slurp(dir / "run" / file), model);
    }
  }

  TEST_CASE("ensemble trace rows lie on the simplex") {
    const auto dir = fresh_dir("trace");
    REQUIRE(cli({"train", "--config", quick_config(dir).string(), "--out", (dir / "run").string()}).code == 0);
    const auto lines = lines_of(slurp(dir / "run" / "ensemble.predictions.csv"));
    CHECK(lines[0] == "date,actual,predicted,alpha,beta,gamma");
    for (std::size_t i = 1; i < lines.size(); ++i) {
      std::vector<double> fields;
      std::istringstream row(lines[i]);
      std::string cell;
      std::getline(row, cell, ',');
      while (std::getline(row, cell, ',')) fields.push_back(std::stod(cell));
      REQUIRE(fields.size() == 5);
      for (std::size_t k = 2; k < 5; ++k) {
        CHECK(fields[k] >= 0.0);
        CHECK(fields[k] <= 1.0);
      }
      CHECK(std::abs(fields[2] + fields[3] + fields[4] - 1.0) <= 1e-9);
    }
  }

  TEST_CASE("predict error paths exit 1") {
    const auto dir = fresh_dir("predict_errors");
    REQUIRE(cli({"train", "--config", quick_config(dir).string(), "--model", "gbdt-leafwise", "--out",
                 (dir / "run").string()})
                .code == 0);
    const std::string pipeline = (dir / "run" / "gbdt-leafwise.json").string();
    const auto all = lines_of(slurp(dir / "run" / "data.csv"));
    std::string shorter;
    for (std::size_t i = 0; i < 6; ++i) shorter += all[i] + "\n";
    spit(dir / "short.csv", shorter);
    const auto r = cli({"predict", "--model", pipeline, "--data", (dir / "short.csv").string(), "--out",
                        (dir / "pred").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("lookback") != std::string::npos);

    spit(dir / "noopen.csv", "date,close,high,low,volume\n2016-01-04,1,1,1,1\n");
    const auto s = cli({"predict", "--model", pipeline, "--data", (dir / "noopen.csv").string(), "--out",
                        (dir / "pred").string()});
    CHECK(s.code == 1);
    CHECK(s.err.find("SchemaMismatch") != std::string::npos);
  }
}

TEST_SUITE("run config") {
  TEST_CASE("config round trip and hash") {
    const auto dir = fresh_dir("hash");
    RunConfig config = load_run_config(quick_config(dir).string());
    config.models = {"lstm"};
    const json doc = config_to_json(config);
    RunConfig again;
    apply_config_json(doc, again);
    CHECK(config_to_json(again) == doc);
    CHECK(config_hash(again) == config_hash(config));
    again.threads = 8;
    again.out = "elsewhere";
    CHECK(config_hash(again) == config_hash(config));
    again.lookback = 6;
    CHECK(config_hash(again) != config_hash(config));
  }

  TEST_CASE("exactly one data source") {
    RunConfig config;
    config.seed = 1;
    config.models = {"lstm"};
    CHECK_THROWS(config.validate());
    config.data = "x.csv";
    config.synthetic = SyntheticSpec{};
    CHECK_THROWS(config.validate());
    config.data.reset();
    CHECK_NOTHROW(config.validate());
    config.synthetic->n_points = config.lookback + 10;
    CHECK_THROWS(config.validate());
  }
}
