#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "colt/checkpoint.hpp"
#include "colt/corpus.hpp"
#include "colt/embedder.hpp"
#include "colt/error.hpp"
#include "colt/graph.hpp"
#include "colt/io.hpp"
#include "colt/metrics.hpp"
#include "colt/retrieval.hpp"
#include "colt/synthetic.hpp"
#include "colt/training.hpp"

namespace colt::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Manifest {
  std::string command;
  json config = json::object();
  json inputs = json::object();
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;
  Clock::time_point started = Clock::now();

  void add_input(const fs::path& p) { inputs[p.string()] = sha256_file(p); }

  void write(const fs::path& dir) const {
    const double secs = std::chrono::duration<double>(Clock::now() - started).count();
    json m = {{"command", command},     {"config", config},       {"inputs", inputs},
              {"seed", seed},           {"artifacts", artifacts}, {"duration_seconds", secs}};
    write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
  }
};

// ---------------------------------------------------------------- prepare

struct PrepareArgs {
  std::string tools, queries, out;
  std::uint64_t seed = 0;
  double test_fraction = 0.1;
};

void cmd_prepare(const PrepareArgs& a, std::ostream& out) {
  Manifest manifest;
  manifest.command = "prepare";
  manifest.seed = a.seed;
  manifest.config = {{"seed", a.seed}, {"test_fraction", a.test_fraction}};
  manifest.add_input(a.tools);
  manifest.add_input(a.queries);

  Corpus corpus = load_corpus(a.tools, a.queries);
  if (!corpus.fully_split()) corpus = split(corpus, a.test_fraction, a.seed);
  if (corpus.queries_in(Split::kTest).empty()) throw DataError("prepare: test split is empty");
  const SceneTable scenes = derive_scenes(corpus);
  const CollaborativeGraphs graphs = build_graphs(corpus, scenes);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  save_tools(corpus, dir / "tools.jsonl");
  save_queries(corpus, dir / "queries.jsonl");
  std::ostringstream scene_lines;
  for (const auto& s : scenes.scenes) {
    json ids = json::array();
    for (std::size_t t : s.member_tools) ids.push_back(corpus.tools()[t].tool_id);
    scene_lines << json{{"scene_id", s.scene_id}, {"tool_ids", ids}}.dump() << '\n';
  }
  write_file_atomic(dir / "scenes.jsonl", scene_lines.str());
  graphs.query_scene.dump_edges(dir / "query_scene.tsv");
  // The Q-T dump uses corpus tool ids, which the compacted graph preserves.
  graphs.query_tool.dump_edges(dir / "query_tool.tsv");
  graphs.scene_tool.dump_edges(dir / "scene_tool.tsv");
  manifest.artifacts = {"tools.jsonl",     "queries.jsonl",  "scenes.jsonl",
                        "query_scene.tsv", "query_tool.tsv", "scene_tool.tsv"};
  manifest.write(dir);

  out << "prepared " << corpus.queries().size() << " queries ("
      << corpus.queries_in(Split::kTrain).size() << " train, "
      << corpus.queries_in(Split::kTest).size() << " test), " << corpus.tools().size() << " tools, "
      << scenes.scenes.size() << " scenes -> " << dir.string() << '\n';
}

Corpus load_prepared(const fs::path& dir) {
  Corpus corpus = load_corpus(dir / "tools.jsonl", dir / "queries.jsonl");
  if (!corpus.fully_split()) throw DataError(dir.string() + ": queries lack split tags; run prepare");
  return corpus;
}

// ---------------------------------------------------------------- embeddings

struct EmbeddingSource {
  bool hash = false;
  std::size_t dim = kDefaultEmbedDim;
  std::uint64_t seed = 0;
  std::string query_file;
  std::string tool_file;

  json to_json() const {
    if (hash) return {{"kind", "hash"}, {"dim", dim}, {"seed", seed}};
    return {{"kind", "file"}, {"query_embeddings", query_file}, {"tool_embeddings", tool_file}};
  }

  static EmbeddingSource from_json(const json& j) {
    EmbeddingSource s;
    s.hash = j.value("kind", "") == "hash";
    s.dim = j.value("dim", kDefaultEmbedDim);
    s.seed = j.value("seed", std::uint64_t{0});
    s.query_file = j.value("query_embeddings", "");
    s.tool_file = j.value("tool_embeddings", "");
    return s;
  }
};

EmbeddingTable query_embeddings(const EmbeddingSource& src, const Corpus& corpus,
                                const std::vector<std::size_t>& queries, std::ostream& err) {
  std::vector<std::string> ids, texts;
  for (std::size_t q : queries) {
    ids.push_back(corpus.queries()[q].query_id);
    texts.push_back(corpus.queries()[q].text);
  }
  if (src.hash) return hash_embed_table("query", ids, texts, src.dim, src.seed);
  if (src.query_file.empty()) throw UsageError("no query embeddings given and --hash-embed not set");
  auto loaded = load_embeddings(src.query_file, ids);
  if (loaded.ignored_rows > 0) {
    err << "warning: " << loaded.ignored_rows << " unused rows in " << src.query_file << '\n';
  }
  return std::move(loaded.table);
}

EmbeddingTable tool_embeddings(const EmbeddingSource& src, const Corpus& corpus, std::ostream& err) {
  std::vector<std::string> ids, texts;
  for (const auto& t : corpus.tools()) {
    ids.push_back(t.tool_id);
    texts.push_back(t.description);
  }
  if (src.hash) return hash_embed_table("tool", ids, texts, src.dim, src.seed);
  if (src.tool_file.empty()) throw UsageError("no tool embeddings given and --hash-embed not set");
  auto loaded = load_embeddings(src.tool_file, ids);
  if (loaded.ignored_rows > 0) {
    err << "warning: " << loaded.ignored_rows << " unused rows in " << src.tool_file << '\n';
  }
  return std::move(loaded.table);
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string prepared, out;
  EmbeddingSource source;
  TrainConfig config;
  std::vector<std::string> ablations;
};

void cmd_train(TrainArgs a, std::ostream& out, std::ostream& err) {
  Manifest manifest;
  manifest.command = "train";
  const fs::path prepared(a.prepared);
  manifest.add_input(prepared / "tools.jsonl");
  manifest.add_input(prepared / "queries.jsonl");

  for (const auto& name : a.ablations) {
    const Ablation ab = parse_ablation(name);
    // Without stage-1 learning the initial vectors come from the built-in embedder.
    if (ab == Ablation::kSemantic) a.source.hash = true;
    a.config = ablate(a.config, ab);
  }
  if (!a.source.hash) {
    if (a.source.query_file.empty() || a.source.tool_file.empty()) {
      throw UsageError("train needs --query-embeddings and --tool-embeddings, or --hash-embed");
    }
    manifest.add_input(a.source.query_file);
    manifest.add_input(a.source.tool_file);
  }

  const Corpus corpus = load_prepared(prepared);
  const SceneTable scenes = derive_scenes(corpus);
  const CollaborativeGraphs graphs = build_graphs(corpus, scenes);
  const TrainConfig resolved = resolve_config(a.config, corpus, scenes);
  const EmbeddingTable q0 = query_embeddings(a.source, corpus, scenes.train_queries, err);
  const EmbeddingTable t0 = tool_embeddings(a.source, corpus, err);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  std::ostringstream log;
  log << "epoch,L_list,L_CQ,L_CS,total\n";
  const TrainedModel model = train(corpus, scenes, graphs, q0, t0, resolved, [&](const EpochLog& e) {
    log << format_epoch_log(e) << '\n';
  });

  json provenance = {{"embedding", a.source.to_json()},
                     {"ablations", a.ablations},
                     {"corpus", {{"tools", sha256_file(prepared / "tools.jsonl")},
                                 {"queries", sha256_file(prepared / "queries.jsonl")}}},
                     {"epochs_run", model.pass_through ? 0 : resolved.epochs}};
  save_checkpoint(model, dir, provenance);
  write_file_atomic(dir / "train.log", log.str());

  manifest.seed = resolved.seed;
  manifest.config = config_to_json(resolved);
  manifest.config["embedding"] = a.source.to_json();
  manifest.artifacts = {"meta.json", "train.log"};
  manifest.write(dir);
  out << (model.pass_through ? "saved pass-through checkpoint -> " : "trained checkpoint -> ")
      << dir.string() << '\n';
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint, prepared, out, split = "test", query_embeddings;
  std::vector<std::size_t> ks{3, 5};
  bool breakdown = false;
  unsigned threads = 1;
};

std::vector<QueryInput> make_inputs(const Corpus& corpus, const std::vector<std::size_t>& queries,
                                    const Retriever& retriever, const EmbeddingSource& src,
                                    std::ostream& err) {
  std::vector<std::size_t> unseen;
  for (std::size_t q : queries) {
    if (!retriever.is_trained_query(corpus.queries()[q].query_id)) unseen.push_back(q);
  }
  std::optional<EmbeddingTable> vectors;
  if (!unseen.empty()) vectors = query_embeddings(src, corpus, unseen, err);
  std::vector<QueryInput> inputs;
  for (std::size_t q : queries) {
    QueryInput in{corpus.queries()[q].query_id, {}};
    if (vectors && vectors->contains(in.query_id)) {
      auto v = vectors->at(in.query_id);
      in.semantic.assign(v.begin(), v.end());
    }
    inputs.push_back(std::move(in));
  }
  return inputs;
}

void cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  Manifest manifest;
  manifest.command = "eval";
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const fs::path prepared(a.prepared);
  manifest.add_input(prepared / "tools.jsonl");
  manifest.add_input(prepared / "queries.jsonl");
  manifest.add_input(fs::path(a.checkpoint) / "meta.json");
  const Corpus corpus = load_prepared(prepared);

  for (const auto& t : corpus.tools()) {
    if (!ck.model.tool_view.contains(t.tool_id)) {
      throw DataError("checkpoint does not cover tool " + t.tool_id);
    }
  }
  EmbeddingSource src = EmbeddingSource::from_json(ck.meta.at("provenance").at("embedding"));
  if (!a.query_embeddings.empty()) {
    src.hash = false;
    src.query_file = a.query_embeddings;
  }

  std::vector<std::size_t> queries;
  if (a.split == "test") {
    queries = corpus.queries_in(Split::kTest);
  } else if (a.split == "train") {
    queries = corpus.queries_in(Split::kTrain);
  } else {
    for (std::size_t q = 0; q < corpus.queries().size(); ++q) queries.push_back(q);
  }
  if (queries.empty()) throw DataError("no queries in split " + a.split);

  const Retriever retriever(ck.model);
  const auto inputs = make_inputs(corpus, queries, retriever, src, err);
  std::size_t depth = *std::max_element(a.ks.begin(), a.ks.end());
  for (std::size_t q : queries) depth = std::max(depth, corpus.gold_indices(q).size());
  const auto run = retriever.retrieve_all(inputs, depth, a.threads);
  const EvalReport report = evaluate(run, corpus, queries, a.ks, a.breakdown);

  const fs::path dir = a.out.empty() ? fs::path(a.checkpoint) / "eval" : fs::path(a.out);
  fs::create_directories(dir);
  save_run(run, dir / "run.jsonl");
  save_report(report, dir / "report.json");
  manifest.config = {{"k", a.ks}, {"breakdown", a.breakdown}, {"split", a.split}};
  manifest.seed = ck.model.config.seed;
  manifest.artifacts = {"run.jsonl", "report.json"};
  manifest.write(dir);
  out << report_table(report);
}

// ---------------------------------------------------------------- retrieve

struct RetrieveArgs {
  std::string checkpoint, query, query_file, query_embeddings, out;
  std::size_t k = 5;
  unsigned threads = 1;
};

void cmd_retrieve(const RetrieveArgs& a, std::ostream& out, std::ostream& err) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const EmbeddingSource src = EmbeddingSource::from_json(ck.meta.at("provenance").at("embedding"));
  const Retriever retriever(ck.model);

  std::vector<std::pair<std::string, std::string>> requests;  // (id, text)
  if (!a.query.empty()) requests.emplace_back("query", a.query);
  if (!a.query_file.empty()) {
    for_each_jsonl(a.query_file, [&](std::size_t line, const json& obj) {
      requests.emplace_back(require_string(obj, "query_id", line), obj.value("text", std::string{}));
    });
  }
  if (requests.empty()) throw UsageError("retrieve needs --query or --query-file");

  std::optional<EmbeddingTable> imported;
  if (!a.query_embeddings.empty()) imported = load_embeddings(fs::path(a.query_embeddings));

  std::vector<QueryInput> inputs;
  for (const auto& [id, text] : requests) {
    QueryInput in{id, {}};
    if (!retriever.is_trained_query(id)) {
      if (imported && imported->contains(id)) {
        auto v = imported->at(id);
        in.semantic.assign(v.begin(), v.end());
      } else if (src.hash) {
        in.semantic = hash_embed(text, src.dim, src.seed);
      } else {
        throw DataError("no embedding for query " + id +
                        " (checkpoint uses imported embeddings; pass --query-embeddings)");
      }
    }
    inputs.push_back(std::move(in));
  }
  const auto run = retriever.retrieve_all(inputs, a.k, a.threads);
  if (a.out.empty()) {
    out << serialize_run(run);
  } else {
    save_run(run, a.out);
    err << "wrote " << run.size() << " ranked lists to " << a.out << '\n';
  }
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out;
  BundleCorpusOptions options;
};

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  const Corpus corpus = make_bundle_corpus(a.options);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  save_tools(corpus, dir / "tools.jsonl");
  save_queries(corpus, dir / "queries.jsonl");
  out << "wrote " << corpus.queries().size() << " queries over " << corpus.tools().size()
      << " tools -> " << dir.string() << '\n';
}

void add_train_flags(CLI::App* cmd, TrainArgs& a) {
  TrainConfig& c = a.config;
  cmd->add_option("--prepared", a.prepared, "Directory written by prepare")->required();
  cmd->add_option("--out", a.out, "Checkpoint directory")->required();
  cmd->add_option("--query-embeddings", a.source.query_file, "Imported query embedding file");
  cmd->add_option("--tool-embeddings", a.source.tool_file, "Imported tool embedding file");
  cmd->add_flag("--hash-embed", a.source.hash, "Use the built-in 3-gram hashing embedder");
  cmd->add_option("--embed-dim", a.source.dim, "Built-in embedder dimension")->capture_default_str();
  cmd->add_option("--embed-seed", a.source.seed, "Built-in embedder seed")->capture_default_str();
  cmd->add_option("--layers", c.layers, "Propagation layers I")->capture_default_str();
  cmd->add_option("--lambda", c.lambda, "Contrastive loss weight")->capture_default_str();
  cmd->add_option("--tau", c.temperature, "Contrastive temperature")->capture_default_str();
  cmd->add_option("--list-length", c.list_length, "Sampled list length L")->capture_default_str();
  cmd->add_option("--lr", c.learning_rate, "Learning rate")->capture_default_str();
  cmd->add_option("--weight-decay", c.weight_decay, "Decoupled weight decay")->capture_default_str();
  cmd->add_option("--epochs", c.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--batch-size", c.batch_size, "Queries per batch")->capture_default_str();
  cmd->add_option("--beta1", c.beta1, "Adam beta1")->capture_default_str();
  cmd->add_option("--beta2", c.beta2, "Adam beta2")->capture_default_str();
  cmd->add_option("--adam-eps", c.epsilon, "Adam epsilon")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Random seed")->envname("COLT_SEED")->capture_default_str();
  cmd->add_option("--ablate", a.ablations, "semantic, collab, listwise or contrastive")
      ->check(CLI::IsMember({"semantic", "collab", "collaborative", "listwise", "contrastive"}));
  cmd->add_option("--threads", "Worker threads (training always reduces in a fixed order)")->type_name("UINT");
  cmd->add_option("--config", "Flat key=value file mirroring the flag names; flags win")->type_name("FILE");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Splices the entries of a `--config` file into the argument list as
/// flags. Keys already given on the command line are skipped, so explicit
/// flags take precedence over the file. `key = true` becomes a bare flag and
/// `key = false` is dropped.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::string path;
  std::vector<std::string> out;
  std::set<std::string> given;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config" && i + 1 < args.size()) {
      path = args[++i];
      continue;
    }
    if (a.rfind("--config=", 0) == 0) {
      path = a.substr(9);
      continue;
    }
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') - 2));  // npos keeps the rest
    out.push_back(a);
  }
  if (path.empty()) return args;

  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    std::replace(key.begin(), key.end(), '_', '-');
    if (given.contains(key)) continue;
    if (value == "false") continue;
    out.push_back("--" + key);
    if (value != "true") out.push_back(value);
  }
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Completeness-oriented tool retrieval: prepare, train, eval, retrieve"};
  app.name(args.empty() ? "colt" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* p = app.add_subcommand("prepare", "Split a corpus and derive scenes and graphs");
  p->add_option("--tools", prep.tools, "Tools JSONL")->required()->check(CLI::ExistingFile);
  p->add_option("--queries", prep.queries, "Queries JSONL")->required()->check(CLI::ExistingFile);
  p->add_option("--out", prep.out, "Output directory")->required();
  p->add_option("--seed", prep.seed, "Split seed")->envname("COLT_SEED")->capture_default_str();
  p->add_option("--test-fraction", prep.test_fraction, "Held-out fraction")->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Collaborative learning on a prepared corpus");
  add_train_flags(t, tr);

  EvalArgs ev;
  std::string ks = "3,5";
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint with Recall, NDCG and COMP");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
  e->add_option("--prepared", ev.prepared, "Prepared corpus directory")->required();
  e->add_option("--k", ks, "Comma-separated cutoffs")->capture_default_str();
  e->add_flag("--breakdown", ev.breakdown, "Group by gold-set size and add @|N| metrics");
  e->add_option("--split", ev.split, "Queries to evaluate")
      ->check(CLI::IsMember({"test", "train", "all"}))
      ->capture_default_str();
  e->add_option("--query-embeddings", ev.query_embeddings, "Embedding file for unseen queries");
  e->add_option("--out", ev.out, "Report directory (default <checkpoint>/eval)");
  e->add_option("--threads", ev.threads, "Worker threads")->capture_default_str();

  RetrieveArgs rt;
  auto* r = app.add_subcommand("retrieve", "Rank tools for ad-hoc queries");
  r->add_option("--checkpoint", rt.checkpoint, "Checkpoint directory")->required();
  r->add_option("--query", rt.query, "Query text");
  r->add_option("--query-file", rt.query_file, "JSONL with query_id and text")->check(CLI::ExistingFile);
  r->add_option("--query-embeddings", rt.query_embeddings, "Embedding file for the queries");
  r->add_option("--k", rt.k, "Tools per query")->capture_default_str();
  r->add_option("--out", rt.out, "Output JSONL (default stdout)");
  r->add_option("--threads", rt.threads, "Worker threads")->capture_default_str();

  SynthArgs sy;
  auto* s = app.add_subcommand("synth", "Write a synthetic bundle corpus");
  s->add_option("--out", sy.out, "Output directory")->required();
  s->add_option("--queries", sy.options.queries)->capture_default_str();
  s->add_option("--bundles", sy.options.bundles)->capture_default_str();
  s->add_option("--tools-per-bundle", sy.options.tools_per_bundle)->capture_default_str();
  s->add_option("--bundles-per-domain", sy.options.bundles_per_domain)->capture_default_str();
  s->add_option("--mentioned-tools", sy.options.mentioned_tools)->capture_default_str();
  s->add_option("--seed", sy.options.seed)->capture_default_str();

  std::vector<std::string> expanded;
  try {
    expanded = expand_config(args);
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << '\n';
    return kUsage;
  }
  std::vector<const char*> argv;
  for (const auto& a : expanded) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& ex) {
    err << ex.what() << '\n';
    return kUsage;
  }

  try {
    if (*p) {
      cmd_prepare(prep, out);
    } else if (*t) {
      cmd_train(tr, out, err);
    } else if (*e) {
      ev.ks.clear();
      std::stringstream ss(ks);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        try {
          const long v = std::stol(tok);
          if (v < 1) throw UsageError("--k values must be >= 1");
          ev.ks.push_back(static_cast<std::size_t>(v));
        } catch (const std::logic_error&) {
          throw UsageError("bad --k value '" + tok + "'");
        }
      }
      if (ev.ks.empty()) throw UsageError("--k is empty");
      cmd_eval(ev, out, err);
    } else if (*r) {
      cmd_retrieve(rt, out, err);
    } else if (*s) {
      cmd_synth(sy, out);
    }
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << '\n';
    return kUsage;
  } catch (const NumericalError& ex) {
    err << "numerical failure: " << ex.what() << '\n';
    return kNumericalFailure;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kDataError;
  }
  return kOk;
}

}  // namespace colt::cli
