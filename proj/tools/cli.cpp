#include "cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>
#include <type_traits>

#include "CLI11.hpp"
#include "json.hpp"
#include "xmodal/dataset.hpp"
#include "xmodal/error.hpp"
#include "xmodal/index.hpp"
#include "xmodal/log.hpp"
#include "xmodal/metrics.hpp"
#include "xmodal/model.hpp"
#include "xmodal/report.hpp"
#include "xmodal/service.hpp"
#include "xmodal/synthetic.hpp"
#include "xmodal/trainer.hpp"
#include "xmodal/tuner.hpp"

namespace xmodal::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

template <class T>
CLI::Option* option(CLI::App* app, const std::string& name, T& var, const std::string& desc) {
  CLI::Option* o = app->add_option(name, var, desc);
  if constexpr (std::is_floating_point_v<T>) {
    o->default_str(format_number(var));
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!var.empty()) o->default_str(var);
  } else {
    o->capture_default_str();
  }
  return o;
}

CLI::Option* required(CLI::App* app, const std::string& name, std::string& var,
                      const std::string& desc) {
  return app->add_option(name, var, desc)->required();
}

std::optional<ModelParams> maybe_model(const std::string& path, std::size_t dim) {
  if (path.empty()) return std::nullopt;
  ModelParams p = load_params(path);
  if (p.dim != dim) {
    throw ShapeError("model dimension " + std::to_string(p.dim) + " does not match data dimension " +
                     std::to_string(dim));
  }
  return p;
}

// ---------------------------------------------------------------- synth

struct SynthOpts {
  SynthSpec spec;
  std::string out;
};

void add_synth(CLI::App& app, SynthOpts& o, std::function<void()>& action, std::ostream& out) {
  CLI::App* c = app.add_subcommand("synth", "Generate a seeded two-class synthetic embedding set");
  option(c, "--n", o.spec.n, "Number of studies");
  option(c, "--dim", o.spec.dim, "Embedding dimension");
  option(c, "--seed", o.spec.seed, "Random seed");
  option(c, "--abnormal-frac", o.spec.abnormal_fraction, "Fraction of abnormal studies");
  option(c, "--margin", o.spec.margin, "Class-mean separation in units of sigma");
  option(c, "--sigma", o.spec.sigma, "Within-class standard deviation");
  option(c, "--pair-noise", o.spec.pair_noise, "Per-modality noise standard deviation");
  option(c, "--modality-gap", o.spec.modality_gap, "Blend toward a random rotation for text, in [0,1]");
  c->add_flag("--identical-modalities", o.spec.identical_modalities, "Make text an exact copy of image");
  option(c, "--id-prefix", o.spec.id_prefix, "Study id prefix");
  required(c, "--out", o.out, "Output CMXE path");
  c->callback([&] {
    action = [&] {
      if (o.spec.n == 0 || o.spec.dim == 0) throw UsageError("--n and --dim must be positive");
      if (o.spec.abnormal_fraction < 0.0 || o.spec.abnormal_fraction > 1.0)
        throw UsageError("--abnormal-frac must lie in [0,1]");
      if (o.spec.modality_gap < 0.0 || o.spec.modality_gap > 1.0)
        throw UsageError("--modality-gap must lie in [0,1]");
      const EmbeddingSet set = make_synthetic(o.spec);
      write_embeddings(set, o.out);
      out << json{{"out", o.out}, {"records", set.size()}, {"dim", set.dim}}.dump() << "\n";
    };
  });
}

// ---------------------------------------------------------------- ingest

struct IngestOpts {
  std::string manifest, out;
};

void add_ingest(CLI::App& app, IngestOpts& o, std::function<void()>& action, std::ostream& out,
                std::ostream& err) {
  CLI::App* c = app.add_subcommand("ingest", "Parse report XML listed in a manifest into a study corpus");
  required(c, "--manifest", o.manifest, "Line-delimited JSON manifest {study_id, image_path, report_path}");
  required(c, "--out", o.out, "Output study corpus (line-delimited JSON)");
  c->callback([&] {
    action = [&] {
      const IngestResult r = ingest_manifest(read_manifest(o.manifest));
      for (const auto& f : r.failures) err << "warning: study " << f.study_id << ": " << f.message << "\n";
      if (r.records.empty()) throw PreconditionError("no study in the manifest could be ingested");
      write_study_corpus(r.records, o.out);
      std::size_t normal = 0;
      for (const auto& s : r.records) normal += s.label == Label::Normal;
      out << json{{"out", o.out},
                  {"studies", r.records.size()},
                  {"normal", normal},
                  {"abnormal", r.records.size() - normal},
                  {"failures", r.failures.size()}}
                 .dump()
          << "\n";
    };
  });
}

// ---------------------------------------------------------------- split

struct SplitOpts {
  std::string in, out_dir;
  SplitSpec spec;
};

void add_split(CLI::App& app, SplitOpts& o, std::function<void()>& action, std::ostream& out) {
  CLI::App* c = app.add_subcommand("split", "Split a CMXE set into train/val/test CMXE files");
  required(c, "--in", o.in, "Input CMXE path");
  required(c, "--out-dir", o.out_dir, "Directory receiving train.cmxe, val.cmxe, test.cmxe");
  option(c, "--test-per-class", o.spec.test_per_class, "Held-out test studies per label");
  option(c, "--val-frac", o.spec.val_fraction, "Validation fraction of the remainder");
  option(c, "--seed", o.spec.seed, "Random seed");
  c->callback([&] {
    action = [&] {
      if (!(o.spec.val_fraction > 0.0 && o.spec.val_fraction < 1.0))
        throw UsageError("--val-frac must lie in (0,1)");
      const CorpusSplit s = split_corpus(read_embeddings(o.in), o.spec);
      fs::create_directories(o.out_dir);
      const fs::path dir(o.out_dir);
      write_embeddings(s.train, dir / "train.cmxe");
      write_embeddings(s.val, dir / "val.cmxe");
      write_embeddings(s.test, dir / "test.cmxe");
      out << json{{"train", s.train.size()}, {"val", s.val.size()}, {"test", s.test.size()}}.dump()
          << "\n";
    };
  });
}

// ---------------------------------------------------------------- train / tune

struct TrainingFlags {
  TrainConfig cfg;
  std::string train, val;
};

void add_training_flags(CLI::App* c, TrainingFlags& t, bool with_lambdas) {
  required(c, "--train", t.train, "Training CMXE path");
  required(c, "--val", t.val, "Validation CMXE path");
  option(c, "--batch", t.cfg.batch_size, "Batch size");
  option(c, "--lr-backbone", t.cfg.optim.lr_backbone, "Learning rate of the modality adapters");
  option(c, "--lr-head", t.cfg.optim.lr_head, "Learning rate of the classification head");
  option(c, "--weight-decay", t.cfg.optim.weight_decay, "Decoupled weight decay");
  option(c, "--warmup-frac", t.cfg.warmup_fraction, "Fraction of steps spent in linear warmup");
  if (with_lambdas) {
    option(c, "--lambda1", t.cfg.weights.binary, "Weight of the binary cross-entropy loss");
    option(c, "--lambda2", t.cfg.weights.supcon, "Weight of the supervised contrastive loss");
    option(c, "--lambda3", t.cfg.weights.clip, "Weight of the CLIP loss");
  }
  option(c, "--tau", t.cfg.weights.tau, "Contrastive temperature");
  option(c, "--dropout", t.cfg.dropout_p, "Dropout probability on the fused hidden layer");
  option(c, "--seed", t.cfg.seed, "Random seed");
}

void validate_training(const TrainConfig& cfg) {
  try {
    cfg.validate();
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
}

struct TrainOpts {
  TrainingFlags t;
  std::string out, log_path;
};

void add_train(CLI::App& app, TrainOpts& o, std::function<void()>& action, std::ostream& out) {
  CLI::App* c = app.add_subcommand("train", "Fine-tune adapters and head with the composite loss");
  add_training_flags(c, o.t, true);
  option(c, "--epochs", o.t.cfg.epochs, "Training epochs");
  required(c, "--out", o.out, "Output model (CMXM) path");
  option(c, "--log", o.log_path, "Also write per-epoch JSON lines to this file");
  c->callback([&] {
    action = [&] {
      validate_training(o.t.cfg);
      TrainConfig cfg = o.t.cfg;
      cfg.log_path = o.log_path;
      const TrainResult r = train(read_embeddings(o.t.train), read_embeddings(o.t.val), cfg);
      save_params(r.params, o.out);
      for (const auto& e : r.logs) out << epoch_log_json(e) << "\n";
    };
  });
}

struct TuneOpts {
  TrainingFlags t;
  SearchSpace space;
  std::string strategy = "surrogate";
  std::size_t epochs_per_trial = 5;
  std::uint64_t tuner_seed = 0;
  std::string ledger;
};

void add_tune(CLI::App& app, TuneOpts& o, std::function<void()>& action, std::ostream& out) {
  CLI::App* c = app.add_subcommand("tune", "Search the loss weights by validation retrieval accuracy");
  add_training_flags(c, o.t, false);
  option(c, "--strategy", o.strategy, "Proposal strategy: surrogate or quasirandom");
  option(c, "--trials", o.space.trials, "Number of trials");
  option(c, "--epochs-per-trial", o.epochs_per_trial, "Training epochs per trial");
  option(c, "--tuner-seed", o.tuner_seed, "Seed of the proposal sequence");
  option(c, "--ledger", o.ledger, "Write one JSON line per trial to this file");
  c->callback([&] {
    action = [&] {
      const auto strategy = strategy_from_string(o.strategy);
      if (!strategy) throw UsageError("--strategy must be surrogate or quasirandom");
      if (o.epochs_per_trial == 0) throw UsageError("--epochs-per-trial must be positive");
      try {
        o.space.validate();
      } catch (const ParameterError& e) {
        throw UsageError(e.what());
      }
      validate_training(o.t.cfg);
      const TuneResult r = tune_training(read_embeddings(o.t.train), read_embeddings(o.t.val), o.t.cfg,
                                         o.space, *strategy, o.tuner_seed, o.epochs_per_trial);
      if (!o.ledger.empty()) write_trial_ledger(r, o.ledger);
      for (const auto& t : r.trials) out << trial_json(t) << "\n";
      if (!r.best) throw PreconditionError("every trial failed");
      out << json{{"best", json::parse(trial_json(*r.best))}}.dump() << "\n";
    };
  });
}

// ---------------------------------------------------------------- index / query / eval

struct IndexOpts {
  std::string embeddings, model, out;
};

void add_index_build(CLI::App& app, IndexOpts& o, std::function<void()>& action, std::ostream& out) {
  CLI::App* c = app.add_subcommand("index-build", "Build the fused retrieval index");
  required(c, "--embeddings", o.embeddings, "CMXE path of the studies to index");
  option(c, "--model", o.model, "CMXM model; omit to index raw backbone embeddings");
  required(c, "--out", o.out, "Output CMXI path");
  c->callback([&] {
    action = [&] {
      const EmbeddingSet set = read_embeddings(o.embeddings);
      const auto params = maybe_model(o.model, set.dim);
      const FusedIndex idx = build_index(params ? &*params : nullptr, set);
      save_index(idx, o.out);
      out << json{{"out", o.out}, {"entries", idx.size()}, {"dim", idx.dim()}}.dump() << "\n";
    };
  });
}

struct QueryOpts {
  std::string index, embeddings, model, id, modality = "image";
  std::size_t k = 10;
  bool exclude_self = false;
};

void add_query(CLI::App& app, QueryOpts& o, std::function<void()>& action, std::ostream& out) {
  CLI::App* c = app.add_subcommand("query", "Retrieve the top-k studies for one study's image or report");
  required(c, "--index", o.index, "CMXI index path");
  required(c, "--embeddings", o.embeddings, "CMXE path holding the query study");
  option(c, "--model", o.model, "CMXM model used to build the index");
  required(c, "--id", o.id, "Query study id");
  option(c, "--modality", o.modality, "Query modality: image or text");
  option(c, "--k", o.k, "Number of results");
  c->add_flag("--exclude-self", o.exclude_self, "Drop the query study from its own results");
  c->callback([&] {
    action = [&] {
      const auto modality = modality_from_string(o.modality);
      if (!modality) throw UsageError("--modality must be image or text");
      if (o.k == 0 || o.k > kMaxSearchK) throw UsageError("--k must lie in [1, 1000]");
      const FusedIndex idx = load_index(o.index);
      const EmbeddingSet set = read_embeddings(o.embeddings);
      const auto params = maybe_model(o.model, set.dim);
      const SearchResult hits =
          query_by_id(idx, set, params ? &*params : nullptr, o.id, *modality, o.k, o.exclude_self);
      for (std::size_t i = 0; i < hits.size(); ++i) {
        out << json{{"rank", i + 1},
                    {"study_id", hits[i].study_id},
                    {"label", to_string(hits[i].label)},
                    {"score", hits[i].score}}
                   .dump()
            << "\n";
      }
    };
  });
}

struct EvalOpts {
  std::string index, queries, model, direction = "both", json_out;
  std::vector<std::size_t> ks{1, 3, 5, 10};
  bool exclude_self = false;
};

void add_eval(CLI::App& app, EvalOpts& o, std::function<void()>& action, std::ostream& out) {
  CLI::App* c = app.add_subcommand("eval", "Report retrieval and classification metrics");
  required(c, "--index", o.index, "CMXI index path");
  required(c, "--queries", o.queries, "CMXE path of the query studies");
  option(c, "--model", o.model, "CMXM model used to build the index");
  c->add_option("--k", o.ks, "Cutoffs, comma separated")->delimiter(',')->default_str("1,3,5,10");
  option(c, "--direction", o.direction, "i2t, t2i or both");
  c->add_flag("--exclude-self", o.exclude_self, "Drop each query's own study from its results");
  option(c, "--json", o.json_out, "Also write the reports as JSON to this file");
  c->callback([&] {
    action = [&] {
      std::vector<Direction> dirs;
      if (o.direction == "i2t" || o.direction == "both") dirs.push_back(Direction::ImageToText);
      if (o.direction == "t2i" || o.direction == "both") dirs.push_back(Direction::TextToImage);
      if (dirs.empty()) throw UsageError("--direction must be i2t, t2i or both");
      for (std::size_t k : o.ks)
        if (k == 0) throw UsageError("--k values must be positive");
      const FusedIndex idx = load_index(o.index);
      const EmbeddingSet queries = read_embeddings(o.queries);
      const auto params = maybe_model(o.model, queries.dim);
      std::vector<MetricsReport> reports;
      for (Direction d : dirs) {
        reports.push_back(full_report(idx, queries, params ? &*params : nullptr, d, o.ks, o.exclude_self));
      }
      out << render_table(reports);
      if (!o.json_out.empty()) {
        std::ofstream f(o.json_out);
        if (!f) throw IoError("cannot open " + o.json_out + " for writing");
        f << reports_json(reports) << "\n";
      }
    };
  });
}

// ---------------------------------------------------------------- serve

std::atomic<bool> g_stop_requested{false};

extern "C" void on_stop_signal(int) { g_stop_requested = true; }

struct ServeOpts {
  std::string index, embeddings, model, bind = "127.0.0.1:8080";
};

void add_serve(CLI::App& app, ServeOpts& o, std::function<void()>& action, std::ostream& err) {
  CLI::App* c = app.add_subcommand("serve", "Serve the index over HTTP");
  required(c, "--index", o.index, "CMXI index path");
  option(c, "--embeddings", o.embeddings, "CMXE path enabling study_id queries");
  option(c, "--model", o.model, "CMXM model applied to study_id queries");
  option(c, "--bind", o.bind, "host:port to listen on");
  c->callback([&] {
    action = [&] {
      std::pair<std::string, int> addr;
      try {
        addr = parse_bind_address(o.bind);
      } catch (const ParameterError& e) {
        throw UsageError(e.what());
      }
      auto state = std::make_shared<ServiceState>(load_service_state(o.index, o.embeddings, o.model));
      SearchServer server(state);
      const int port = server.bind(addr.first, addr.second);
      err << "listening on " << addr.first << ":" << port << " (" << state->index.size()
          << " entries)\n";
      err.flush();
      g_stop_requested = false;
      std::signal(SIGINT, on_stop_signal);
      std::signal(SIGTERM, on_stop_signal);
      std::thread watcher([&] {
        while (!g_stop_requested) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        server.stop();
      });
      server.listen();
      g_stop_requested = true;
      watcher.join();
      std::signal(SIGINT, SIG_DFL);
      std::signal(SIGTERM, SIG_DFL);
    };
  });
}

// ---------------------------------------------------------------- project2d

struct ProjectOpts {
  std::string embeddings, model, space = "fused", out;
};

void add_project2d(CLI::App& app, ProjectOpts& o, std::function<void()>& action, std::ostream& out) {
  CLI::App* c = app.add_subcommand("project2d", "Export a 2-D PCA projection of the embeddings");
  required(c, "--embeddings", o.embeddings, "CMXE path");
  option(c, "--model", o.model, "CMXM model; omit for raw backbone embeddings");
  option(c, "--space", o.space, "fused, image or text");
  option(c, "--out", o.out, "Write JSON lines here instead of standard output");
  c->callback([&] {
    action = [&] {
      if (o.space != "fused" && !modality_from_string(o.space))
        throw UsageError("--space must be fused, image or text");
      const EmbeddingSet set = read_embeddings(o.embeddings);
      const auto params = maybe_model(o.model, set.dim);
      const ModelParams* p = params ? &*params : nullptr;
      std::vector<Vector> rows;
      if (o.space == "fused") {
        const FusedIndex idx = build_index(p, set);
        for (const auto& e : idx.entries()) rows.push_back(e.vector);
      } else {
        const Modality m = *modality_from_string(o.space);
        for (const auto& r : set.records) rows.push_back(embed_modality(p, r, m));
      }
      const Matrix xy = pca_project_2d(Matrix::from_rows(rows));
      std::ofstream file;
      if (!o.out.empty()) {
        file.open(o.out);
        if (!file) throw IoError("cannot open " + o.out + " for writing");
      }
      std::ostream& dst = o.out.empty() ? out : file;
      for (std::size_t i = 0; i < set.size(); ++i) {
        dst << json{{"study_id", set.records[i].study_id},
                    {"label", to_string(set.records[i].label)},
                    {"x", xy(i, 0)},
                    {"y", xy(i, 1)}}
                   .dump()
            << "\n";
      }
    };
  });
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (!log::configure_from_env()) err << "warning: ignoring unrecognized XMODAL_LOG value\n";

  CLI::App app{"Multi-task cross-modal chest X-ray retrieval", "xmodal"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.get_formatter()->column_width(36);

  std::function<void()> action;
  SynthOpts synth;
  IngestOpts ingest;
  SplitOpts split;
  TrainOpts train_opts;
  TuneOpts tune_opts;
  IndexOpts index;
  QueryOpts query;
  EvalOpts eval;
  ServeOpts serve;
  ProjectOpts project;
  add_ingest(app, ingest, action, out, err);
  add_split(app, split, action, out);
  add_train(app, train_opts, action, out);
  add_tune(app, tune_opts, action, out);
  add_index_build(app, index, action, out);
  add_query(app, query, action, out);
  add_eval(app, eval, action, out);
  add_serve(app, serve, action, err);
  add_project2d(app, project, action, out);
  add_synth(app, synth, action, out);

  std::vector<std::string> argv_storage{"xmodal"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    action();
    return kExitOk;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return e.kind() == ErrorKind::Parameter ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace xmodal::cli
