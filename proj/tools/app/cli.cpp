#include <CLI11.hpp>

#include <cstdio>
#include <ostream>

#include "commands.hpp"
#include "stackcast/error.hpp"

namespace stackcast::app {

namespace {

struct RunFlags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::string data;
  bool synthetic = false;
  std::size_t lookback = 0;
  double train_fraction = 0.0;
  std::size_t threads = 1;
  std::string missing;
  std::string target;
  std::vector<std::string> models;

  CLI::Option* config_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* data_opt = nullptr;
  CLI::Option* synthetic_opt = nullptr;
  CLI::Option* lookback_opt = nullptr;
  CLI::Option* fraction_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
  CLI::Option* missing_opt = nullptr;
  CLI::Option* target_opt = nullptr;
  CLI::Option* models_opt = nullptr;
};

void add_run_flags(CLI::App& cmd, RunFlags& f, bool many_models) {
  f.config_opt = cmd.add_option("--config", f.config, "JSON run config");
  f.seed_opt = cmd.add_option("--seed", f.seed, "run seed");
  f.out_opt = cmd.add_option("--out", f.out, "output directory");
  f.data_opt = cmd.add_option("--data", f.data, "price CSV");
  f.synthetic_opt = cmd.add_flag("--synthetic", f.synthetic, "use the default synthetic series");
  f.lookback_opt = cmd.add_option("--lookback", f.lookback, "window length");
  f.fraction_opt = cmd.add_option("--train-fraction", f.train_fraction, "chronological train share");
  f.threads_opt = cmd.add_option("--threads", f.threads, "worker threads (results do not depend on it)");
  f.missing_opt = cmd.add_option("--missing", f.missing, "missing-value policy: forward_fill or drop_row");
  f.target_opt = cmd.add_option("--target", f.target, "column to forecast");
  if (many_models) {
    f.models_opt = cmd.add_option("--models", f.models, "comma-separated models")->delimiter(',');
  } else {
    f.models_opt = cmd.add_option("--model", f.models, "model to train (repeatable)");
  }
}

RunConfig resolve(const RunFlags& f, std::vector<std::string> default_models) {
  RunConfig config = f.config_opt->count() ? load_run_config(f.config) : RunConfig{};
  if (f.seed_opt->count()) config.seed = f.seed;
  if (f.out_opt->count()) config.out = f.out;
  if (f.data_opt->count() && f.synthetic_opt->count()) {
    throw Error(ErrorCode::kConfigInvalid, "--data and --synthetic are mutually exclusive");
  }
  if (f.data_opt->count()) {
    config.data = f.data;
    config.synthetic.reset();
  }
  if (f.synthetic_opt->count()) {
    config.synthetic = config.synthetic.value_or(SyntheticSpec{});
    config.data.reset();
  }
  if (f.lookback_opt->count()) config.lookback = f.lookback;
  if (f.fraction_opt->count()) config.train_fraction = f.train_fraction;
  if (f.threads_opt->count()) config.threads = f.threads;
  if (f.missing_opt->count()) config.missing = data::parse_missing_policy(f.missing);
  if (f.target_opt->count()) config.target = f.target;
  if (f.models_opt->count()) config.models = f.models;
  if (config.models.empty()) config.models = std::move(default_models);
  config.validate();
  return config;
}

std::string format_metric(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

void print_reports(std::ostream& out, const std::vector<metrics::MetricsReport>& reports) {
  out << "model            r2        mae       rmse      n\n";
  for (const auto& r : reports) {
    std::string name = r.model_name;
    name.resize(std::max<std::size_t>(name.size(), 16), ' ');
    if (r.failed()) {
      out << name << " ERROR  " << r.error << "\n";
    } else {
      out << name << " " << format_metric(r.r2) << "  " << format_metric(r.mae) << "  " << format_metric(r.rmse)
          << "  " << r.n << "\n";
    }
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"stackcast: stacked GBDT/LSTM forecasting of daily prices"};
  app.name(args.empty() ? "stackcast" : args.front());
  app.require_subcommand(1);

  RunFlags train_flags;
  auto* train = app.add_subcommand("train", "fit models and save them with in-sample and test predictions");
  add_run_flags(*train, train_flags, false);

  RunFlags compare_flags;
  auto* compare = app.add_subcommand("compare", "fit several models plus the ensemble and rank them by test r2");
  add_run_flags(*compare, compare_flags, true);

  std::string model_path, predict_data, predict_out = "stackcast-out";
  auto* predict = app.add_subcommand("predict", "predict every forecastable step of a CSV with a saved model");
  predict->add_option("--model", model_path, "pipeline document written by train")->required();
  predict->add_option("--data", predict_data, "price CSV")->required();
  predict->add_option("--out", predict_out, "output directory");

  SyntheticSpec spec;
  std::string gen_config, gen_out = "stackcast-out", gen_name = "synthetic.csv";
  auto* gen = app.add_subcommand("gen-synthetic", "write a seeded synthetic price series");
  auto* gen_config_opt = gen->add_option("--config", gen_config, "JSON config with a \"synthetic\" block");
  auto* gen_seed = gen->add_option("--seed", spec.seed, "generator seed");
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--name", gen_name, "output file name");
  auto* gen_n = gen->add_option("--n-points", spec.n_points, "number of rows");
  auto* gen_offset = gen->add_option("--offset", spec.offset, "level at t = 0");
  auto* gen_trend = gen->add_option("--trend", spec.trend, "slope per step");
  auto* gen_amp = gen->add_option("--amplitude", spec.amplitude, "sine amplitude");
  auto* gen_period = gen->add_option("--period", spec.period, "sine period in steps");
  auto* gen_noise = gen->add_option("--noise", spec.noise, "noise standard deviation");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) {
      const RunConfig config = resolve(train_flags, {"ensemble"});
      const auto result = train_command(config);
      write_files(config.out, result.files);
      print_reports(out, result.reports);
      out << "wrote " << result.files.size() << " files to " << config.out << "\n";
    } else if (compare->parsed()) {
      const RunConfig config = resolve(compare_flags, known_models());
      const auto result = compare_command(config);
      write_files(config.out, result.files);
      print_reports(out, result.reports);
      out << "wrote " << result.files.size() << " files to " << config.out << "\n";
    } else if (predict->parsed()) {
      const auto result = predict_command(model_path, predict_data);
      const std::string name = result.model_name + ".predictions.csv";
      write_file_atomic(std::filesystem::path(predict_out) / name, result.table.to_csv());
      out << "wrote " << result.table.dates.size() << " predictions to "
          << (std::filesystem::path(predict_out) / name).string() << "\n";
    } else if (gen->parsed()) {
      SyntheticSpec resolved;
      if (gen_config_opt->count()) {
        const RunConfig file = load_run_config(gen_config);
        if (!file.synthetic) throw Error(ErrorCode::kConfigInvalid, gen_config + " has no \"synthetic\" block");
        resolved = *file.synthetic;
      }
      if (gen_seed->count()) resolved.seed = spec.seed;
      if (gen_n->count()) resolved.n_points = spec.n_points;
      if (gen_offset->count()) resolved.offset = spec.offset;
      if (gen_trend->count()) resolved.trend = spec.trend;
      if (gen_amp->count()) resolved.amplitude = spec.amplitude;
      if (gen_period->count()) resolved.period = spec.period;
      if (gen_noise->count()) resolved.noise = spec.noise;
      resolved.validate();
      const auto path = std::filesystem::path(gen_out) / gen_name;
      write_file_atomic(path, synthetic_csv(resolved));
      out << "wrote " << resolved.n_points << " rows to " << path.string() << "\n";
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kConfigInvalid ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace stackcast::app
