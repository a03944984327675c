#include "filtnet/cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "filtnet/analysis.hpp"
#include "filtnet/dataset_io.hpp"
#include "filtnet/evaluator.hpp"
#include "filtnet/featurizer.hpp"
#include "filtnet/synthgen.hpp"
#include "filtnet/trainer.hpp"

namespace filtnet::cli {

std::string with_thousands(long long v) {
  std::string digits = std::to_string(v < 0 ? -v : v);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return v < 0 ? "-" + out : out;
}

void print_complexity_table(std::ostream& out, const Dims& dims) {
  const ParamCount p = param_count(dims);
  const StageOpCounts ops = op_count_report(dims);
  const OpCounts total = ops.total();
  const char* names[3] = {"normalization", "features", "classification"};
  const OpCounts* rows[3] = {&ops.normalization, &ops.features, &ops.classification};

  auto line = [&](const std::string& name, std::size_t params, const OpCounts& o) {
    out << std::left << std::setw(16) << name << std::right << std::setw(8) << with_thousands(params)
        << std::setw(10) << with_thousands(o.adds) << std::setw(8) << with_thousands(o.abs_evals) << std::setw(10)
        << with_thousands(o.mults) << std::setw(7) << with_thousands(o.tanh_evals) << std::setw(6)
        << with_thousands(o.relu_ops) << std::setw(8) << with_thousands(o.argmax_ops) << '\n';
  };
  out << std::left << std::setw(16) << "stage" << std::right << std::setw(8) << "params" << std::setw(10) << "adds"
      << std::setw(8) << "abs" << std::setw(10) << "mults" << std::setw(7) << "tanh" << std::setw(6) << "relu"
      << std::setw(8) << "argmax" << '\n';
  for (int i = 0; i < 3; ++i) line(names[i], p.per_stage[i], *rows[i]);
  line("total", p.total, total);
}

std::string complexity_json(const Dims& dims) {
  const ParamCount p = param_count(dims);
  const StageOpCounts ops = op_count_report(dims);
  auto to_json = [](const OpCounts& o) {
    return nlohmann::json{{"adds", o.adds},         {"abs", o.abs_evals}, {"mults", o.mults},
                          {"tanh", o.tanh_evals},   {"relu", o.relu_ops}, {"argmax", o.argmax_ops}};
  };
  nlohmann::json j;
  j["dims"] = {{"n", dims.n}, {"k1", dims.k1}, {"k2", dims.k2}, {"f", dims.f}, {"l", dims.l}, {"c", dims.c}};
  j["params"] = {{"normalization", p.per_stage[0]},
                 {"features", p.per_stage[1]},
                 {"classification", p.per_stage[2]},
                 {"total", p.total}};
  j["ops"] = {{"normalization", to_json(ops.normalization)},
              {"features", to_json(ops.features)},
              {"classification", to_json(ops.classification)},
              {"total", to_json(ops.total())}};
  return j.dump(2);
}

namespace {

struct Options {
  std::string profile = "5class";
  std::string variant = "nonlinear";
  int precision = 32;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  double learning_rate = 0.0;
  double weight_decay = -1.0;
  std::size_t batch = 0;
  std::size_t threads = 0;
  bool drop_f3 = false;
};

void add_training_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--profile", o.profile, "Hyperparameter profile")->check(CLI::IsMember({"5class", "6class"}));
  cmd->add_option("--variant", o.variant, "Model variant")->check(CLI::IsMember({"nonlinear", "linear"}));
  cmd->add_option("--precision", o.precision, "Training arithmetic width")->check(CLI::IsMember({32, 64}));
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--iterations", o.iterations, "Override the profile's iteration count");
  cmd->add_option("--lr", o.learning_rate, "Override the learning rate");
  cmd->add_option("--weight-decay", o.weight_decay, "Override the L2 weight decay");
  cmd->add_option("--batch", o.batch, "Override the batch size");
  cmd->add_option("--threads", o.threads, "Worker threads (0 = hardware)");
  cmd->add_flag("--drop-f3", o.drop_f3, "Train the 6-feature ablation (f3 pinned out)");
}

Profile resolve_profile(const Options& o, const Dataset& ds) {
  Profile p = o.profile == "6class" ? profile_6class() : profile_5class();
  p.hyper.seed = o.seed;
  if (o.iterations) p.hyper.iterations = o.iterations;
  if (o.learning_rate > 0.0) p.hyper.learning_rate = o.learning_rate;
  if (o.weight_decay >= 0.0) p.hyper.weight_decay = o.weight_decay;
  if (o.batch) p.hyper.batch_size = o.batch;
  p.hyper.threads = o.threads;
  p.hyper.drop_f3 = o.drop_f3;
  p.dims.n = ds.segment_length;
  if (ds.class_count() != p.dims.c) {
    throw ConfigError("profile " + o.profile + " expects " + std::to_string(p.dims.c) + " classes, dataset has " +
                      std::to_string(ds.class_count()));
  }
  p.hyper.validate();
  p.dims.validate();
  return p;
}

void require_output_dir(const std::string& path) {
  if (path.empty()) return;
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw ConfigError("output directory does not exist: " + parent.string());
  }
}

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  return f;
}

/// Writes to `path`, or to `fallback` when the path is empty.
template <typename Fn>
void emit(const std::string& path, std::ostream& fallback, Fn&& fn) {
  if (path.empty()) {
    fn(fallback);
    return;
  }
  auto f = open_output(path);
  fn(f);
}

ProgressFn progress_to(std::ostream& err, std::size_t every) {
  return [&err, every](std::size_t it, double loss) {
    if (every && (it + 1) % every == 0) err << "iteration " << (it + 1) << " loss " << loss << '\n';
  };
}

std::array<std::int16_t, kAxes> parse_sample(const std::string& line, std::size_t line_no) {
  const auto fields = split_csv_line(line);
  if (fields.size() != 4) throw FormatError("line " + std::to_string(line_no) + ": expected t,ax,ay,az");
  std::array<std::int16_t, kAxes> s{};
  for (std::size_t d = 0; d < kAxes; ++d) {
    const std::string& f = fields[d + 1];
    int v = 0;
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || ptr != f.data() + f.size() || v < -32768 || v > 32767) {
      throw FormatError("line " + std::to_string(line_no) + ": bad sample '" + f + "'");
    }
    s[d] = static_cast<std::int16_t>(v);
  }
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learnable-filter behavior classifier toolkit", "filtnet"};
  app.require_subcommand(1);

  Options opt;
  std::string data_path, classes_path, model_path, out_path, loss_path, test_path, test_classes_path;

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset CSV (plus .classes manifest)");
  std::size_t synth_animals = 0;
  double synth_scale = 1.0;
  synth->add_option("--out", out_path, "Dataset CSV path")->required();
  synth->add_option("--seed", opt.seed, "Generator seed (default: the built-in config's)");
  synth->add_option("--animals", synth_animals, "Number of animals");
  synth->add_option("--scale", synth_scale, "Multiply per-class segment counts")->check(CLI::PositiveNumber);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset");
  train_cmd->add_option("--data", data_path, "Dataset CSV")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--classes", classes_path, "Class manifest (default <data>.classes)");
  train_cmd->add_option("--model", model_path, "Output model file")->required();
  train_cmd->add_option("--loss", loss_path, "Output loss CSV");
  add_training_options(train_cmd, opt);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a dataset");
  eval_cmd->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", data_path, "Dataset CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--classes", classes_path, "Class manifest");
  eval_cmd->add_option("--out", out_path, "Report JSON (default stdout)");

  // loao
  auto* loao_cmd = app.add_subcommand("loao", "Leave-one-animal-out cross-validation");
  loao_cmd->add_option("--data", data_path, "Dataset CSV")->required()->check(CLI::ExistingFile);
  loao_cmd->add_option("--classes", classes_path, "Class manifest");
  loao_cmd->add_option("--out", out_path, "Report JSON (default stdout)");
  add_training_options(loao_cmd, opt);

  // crossval-datasets
  auto* cross_cmd = app.add_subcommand("crossval-datasets", "Train on one dataset, test on another");
  cross_cmd->add_option("--train", data_path, "Training dataset CSV")->required()->check(CLI::ExistingFile);
  cross_cmd->add_option("--train-classes", classes_path, "Training class manifest");
  cross_cmd->add_option("--test", test_path, "Test dataset CSV")->required()->check(CLI::ExistingFile);
  cross_cmd->add_option("--test-classes", test_classes_path, "Test class manifest");
  cross_cmd->add_option("--out", out_path, "Report JSON (default stdout)");
  add_training_options(cross_cmd, opt);

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "Classify every segment of a dataset CSV");
  infer_cmd->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--data", data_path, "Segment CSV")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--classes", classes_path, "Class manifest");
  infer_cmd->add_option("--out", out_path, "Predictions CSV (default stdout)");

  // stream
  auto* stream_cmd = app.add_subcommand("stream", "Run the streaming engine over a t,ax,ay,az sample CSV");
  stream_cmd->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  stream_cmd->add_option("--input", data_path, "Sample CSV")->required()->check(CLI::ExistingFile);
  stream_cmd->add_option("--out", out_path, "Output CSV (default stdout)");

  // analyze
  auto* analyze_cmd = app.add_subcommand("analyze", "Spectral and feature analysis CSVs");
  std::string asd_path, freqz_path, features_path, stage_name_opt = "all";
  std::size_t freqz_points = 256;
  bool six_features = false;
  analyze_cmd->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--data", data_path, "Dataset CSV")->check(CLI::ExistingFile);
  analyze_cmd->add_option("--classes", classes_path, "Class manifest");
  analyze_cmd->add_option("--asd", asd_path, "ASD CSV output");
  analyze_cmd->add_option("--stage", stage_name_opt, "Stage for the ASD")
      ->check(CLI::IsMember({"all", "normalized", "iir_filtered", "nonlinear_filtered"}));
  analyze_cmd->add_option("--freqz", freqz_path, "FIR frequency-response CSV output");
  analyze_cmd->add_option("--points", freqz_points, "Frequency-response points")->check(CLI::Range(2, 1 << 20));
  analyze_cmd->add_option("--features", features_path, "Feature export CSV output");
  analyze_cmd->add_flag("--six-features", six_features, "Export only f1 and f2");

  // complexity
  auto* complexity_cmd = app.add_subcommand("complexity", "Parameter and operation counts");
  Dims cdims{256, 8, 8, kFeatureCount, 6, 5};
  bool as_json = false;
  complexity_cmd->add_option("--n", cdims.n, "Segment length");
  complexity_cmd->add_option("--k1", cdims.k1, "First FIR length");
  complexity_cmd->add_option("--k2", cdims.k2, "Second FIR length");
  complexity_cmd->add_option("--f", cdims.f, "Feature count");
  complexity_cmd->add_option("--l", cdims.l, "Hidden units");
  complexity_cmd->add_option("--c", cdims.c, "Classes");
  complexity_cmd->add_flag("--json", as_json, "Emit JSON");

  // gradcheck
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Analytic vs finite-difference gradients on random models");
  std::size_t gc_configs = 20;
  double gc_tolerance = 1e-5;
  gradcheck_cmd->add_option("--seed", opt.seed, "Seed for the random configurations");
  gradcheck_cmd->add_option("--configs", gc_configs, "Number of configurations")->check(CLI::PositiveNumber);
  gradcheck_cmd->add_option("--tolerance", gc_tolerance, "Failure threshold");

  if (args.empty()) {
    err << app.help();
    return 2;
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return e.get_exit_code() ? e.get_exit_code() : 2;
  }

  try {
    for (const auto& p : {out_path, model_path, loss_path, asd_path, freqz_path, features_path}) {
      if (*train_cmd || *synth || !p.empty()) require_output_dir(p);
    }

    if (*synth) {
      SynthConfig cfg = default_config();
      if (synth->count("--seed")) cfg.seed = opt.seed;
      if (synth_animals) cfg.animals = synth_animals;
      for (auto& n : cfg.segments_per_class_per_animal) {
        n = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(double(n) * synth_scale)));
      }
      const Dataset ds = gen_dataset(cfg);
      save_dataset(out_path, ds);
      err << "wrote " << ds.segments.size() << " segments to " << out_path << '\n';
      return 0;
    }

    if (*train_cmd) {
      const Dataset ds = load_dataset(data_path, classes_path);
      const Profile p = resolve_profile(opt, ds);
      const Variant v = parse_variant(opt.variant);
      std::vector<double> history;
      ModelParams<float> model;
      if (opt.precision == 64) {
        auto r = train<double>(ds, p.hyper, p.dims, v, progress_to(err, 1000));
        history = std::move(r.loss_history);
        model = r.params.cast<float>();
      } else {
        auto r = train<float>(ds, p.hyper, p.dims, v, progress_to(err, 1000));
        history = std::move(r.loss_history);
        model = std::move(r.params);
      }
      write_model_file(model_path, model);
      if (!loss_path.empty()) {
        auto f = open_output(loss_path);
        f << "iteration,loss\n" << std::setprecision(9);
        for (std::size_t i = 0; i < history.size(); ++i) f << (i + 1) << ',' << history[i] << '\n';
      }
      err << "final loss " << (history.empty() ? 0.0 : history.back()) << '\n';
      return 0;
    }

    if (*eval_cmd) {
      const ModelParams<float> model = read_model_file(model_path);
      const Dataset ds = load_dataset(data_path, classes_path);
      const EvalReport r = evaluate(ds, model);
      emit(out_path, out, [&](std::ostream& o) { o << report_to_json(r) << '\n'; });
      return 0;
    }

    if (*loao_cmd || *cross_cmd) {
      const Dataset ds = load_dataset(data_path, classes_path);
      const Profile p = resolve_profile(opt, ds);
      const Variant v = parse_variant(opt.variant);
      if (opt.precision == 64) err << "note: cross-validation trains in 32-bit arithmetic\n";
      EvalReport r;
      if (*loao_cmd) {
        r = loao_cv(ds, p.hyper, p.dims, v, progress_to(err, 5000));
      } else {
        const Dataset test = load_dataset(test_path, test_classes_path);
        r = cross_dataset_eval(ds, test, p.hyper, p.dims, v, progress_to(err, 5000));
      }
      emit(out_path, out, [&](std::ostream& o) { o << report_to_json(r) << '\n'; });
      err << "overall MCC " << r.overall_mcc << '\n';
      return 0;
    }

    if (*infer_cmd) {
      const ModelParams<float> model = read_model_file(model_path);
      const Dataset ds = load_dataset(data_path, classes_path);
      if (ds.segment_length != model.dims.n) {
        throw DimensionError("model expects N=" + std::to_string(model.dims.n) + ", segments have " +
                             std::to_string(ds.segment_length));
      }
      const auto preds = predict_all(ds, model);
      emit(out_path, out, [&](std::ostream& o) {
        o << "segment_index,class_index,class_name\n";
        for (std::size_t i = 0; i < preds.size(); ++i) {
          const std::string name = preds[i] < ds.class_names.size() ? ds.class_names[preds[i]] : "";
          o << i << ',' << preds[i] << ',' << name << '\n';
        }
      });
      return 0;
    }

    if (*stream_cmd) {
      const ModelParams<float> model = read_model_file(model_path);
      std::ifstream in(data_path);
      if (!in) throw ConfigError("cannot read " + data_path);
      auto state = stream_init(model);
      emit(out_path, out, [&](std::ostream& o) {
        o << "segment_index,class_index";
        for (std::size_t i = 1; i <= kFeatureCount; ++i) o << ",f" << i;
        o << '\n' << std::setprecision(9);
        std::string line;
        std::size_t line_no = 0, segment = 0;
        while (std::getline(in, line)) {
          ++line_no;
          if (!line.empty() && line.back() == '\r') line.pop_back();
          if (line.empty()) continue;
          if (line_no == 1 && line.rfind("t,", 0) == 0) continue;  // header
          if (auto r = stream_push(state, parse_sample(line, line_no), model)) {
            o << segment++ << ',' << r->class_index;
            for (float f : r->features) o << ',' << f;
            o << '\n';
          }
        }
        if (state.counter) err << "note: " << state.counter << " trailing samples did not fill a segment\n";
      });
      return 0;
    }

    if (*analyze_cmd) {
      const ModelParams<double> model = read_model_file(model_path).cast<double>();
      if (asd_path.empty() && freqz_path.empty() && features_path.empty()) {
        throw ConfigError("analyze needs at least one of --asd, --freqz, --features");
      }
      if ((!asd_path.empty() || !features_path.empty()) && data_path.empty()) {
        throw ConfigError("--asd and --features need --data");
      }
      if (!freqz_path.empty()) {
        auto f = open_output(freqz_path);
        write_frequency_response_csv(f, model, freqz_points);
      }
      if (!data_path.empty()) {
        const Dataset ds = load_dataset(data_path, classes_path);
        if (ds.segment_length != model.dims.n) throw DimensionError("dataset segment length differs from the model's N");
        if (!asd_path.empty()) {
          auto f = open_output(asd_path);
          std::vector<Stage> stages;
          if (stage_name_opt == "all") {
            stages = {Stage::kNormalized, Stage::kIirFiltered, Stage::kNonlinearFiltered};
          } else {
            stages = {parse_stage(stage_name_opt)};
          }
          bool header = true;
          for (Stage s : stages) {
            std::vector<std::size_t> skipped;
            write_asd_csv(f, asd(ds, model, s, &skipped), header);
            header = false;
            for (std::size_t c : skipped) err << "note: class " << ds.class_names.at(c) << " has no segments\n";
          }
        }
        if (!features_path.empty()) {
          auto f = open_output(features_path);
          write_features_csv(f, export_features(ds, model, six_features));
        }
      }
      return 0;
    }

    if (*complexity_cmd) {
      if (as_json) {
        out << complexity_json(cdims) << '\n';
      } else {
        print_complexity_table(out, cdims);
      }
      return 0;
    }

    if (*gradcheck_cmd) {
      const auto cases = gradient_check(opt.seed, gc_configs);
      double worst = 0.0;
      out << "config,variant,n,k1,k2,l,c,batch,max_rel_error,worst_group\n";
      for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        out << i << ',' << variant_name(c.variant) << ',' << c.dims.n << ',' << c.dims.k1 << ',' << c.dims.k2 << ','
            << c.dims.l << ',' << c.dims.c << ',' << c.batch << ',' << std::scientific << std::setprecision(3)
            << c.max_rel_error << std::defaultfloat << ',' << param_group_name(c.worst_group) << '\n';
        worst = std::max(worst, c.max_rel_error);
      }
      out << "max relative error " << std::scientific << std::setprecision(3) << worst << std::defaultfloat
          << (worst < gc_tolerance ? " < " : " >= ") << gc_tolerance << '\n';
      return worst < gc_tolerance ? 0 : 1;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace filtnet::cli
