// mrag: command-line front end for the mixed-modal RAG toolkit.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mrag/chunker.hpp"
#include "mrag/demo.hpp"
#include "mrag/mrag.hpp"
#include "mrag/pipeline.hpp"
#include "mrag/remote.hpp"

namespace fs = std::filesystem;
using namespace mrag;

namespace {

struct Backends {
  std::string embed_endpoint;
  std::string gen_endpoint;
  std::string scripted;
  std::string head_path;
  std::string instruction = kDefaultQueryInstruction;
  double timeout_s = 60.0;
  std::size_t retries = 3;
  std::size_t batch_size = 32;
  std::size_t max_in_flight = 4;

  RemoteOptions remote() const {
    RemoteOptions o;
    o.timeout = std::chrono::seconds(static_cast<long>(timeout_s));
    o.attempts = retries;
    o.batch_size = batch_size;
    o.max_in_flight = max_in_flight;
    return o;
  }
};

/// Owns the embedder chain: reference or remote base, optionally projected.
struct EmbedderStack {
  std::unique_ptr<Embedder> base;
  std::unique_ptr<ProjectedEmbedder> projected;

  const Embedder& get() const { return projected ? *projected : *base; }
};

EmbedderStack open_embedder(const Backends& b) {
  EmbedderStack s;
  if (b.embed_endpoint.empty()) {
    s.base = std::make_unique<ReferenceEmbedder>();
  } else {
    s.base = std::make_unique<RemoteEmbedder>(b.embed_endpoint, b.remote());
  }
  if (!b.head_path.empty()) s.projected = std::make_unique<ProjectedEmbedder>(*s.base, ProjectionHead::load(b.head_path));
  return s;
}

std::unique_ptr<Generator> open_generator(const Backends& b) {
  if (!b.scripted.empty()) return std::make_unique<ScriptedGenerator>(ScriptedGenerator::load(b.scripted));
  if (!b.gen_endpoint.empty()) return std::make_unique<RemoteGenerator>(b.gen_endpoint, b.remote());
  fail(Errc::invalid_input, "a generator is required: pass --gen-endpoint URL or --scripted FILE");
}

void add_embed_options(CLI::App* sub, Backends& b, bool with_instruction) {
  sub->add_option("--embed-endpoint", b.embed_endpoint, "Embedding service base URL (default: reference embedder)");
  sub->add_option("--head", b.head_path, "Projection head applied on top of the base embedder");
  if (with_instruction) sub->add_option("--instruction", b.instruction, "Query instruction")->capture_default_str();
}

void add_generator_options(CLI::App* sub, Backends& b) {
  auto* g = sub->add_option("--gen-endpoint", b.gen_endpoint, "Generation service base URL");
  auto* s = sub->add_option("--scripted", b.scripted, "Scripted generator fixture file")->check(CLI::ExistingFile);
  g->excludes(s);
}

void add_remote_options(CLI::App* sub, Backends& b) {
  sub->add_option("--timeout", b.timeout_s, "Per-request timeout in seconds")->capture_default_str();
  sub->add_option("--retries", b.retries, "Attempts per request")->capture_default_str();
  sub->add_option("--batch-size", b.batch_size, "Items per embedding request")->capture_default_str();
  sub->add_option("--max-in-flight", b.max_in_flight, "Concurrent requests")->capture_default_str();
}

PromptSet load_prompts(const std::string& dir) { return dir.empty() ? PromptSet{} : PromptSet::load(dir); }

std::vector<QAItem> load_qa(const std::string& path) {
  auto r = read_jsonl(path, qa_from_json);
  return std::move(r.records);
}

CorpusStore load_chunk_store(const std::string& path) { return chunk_store(read_chunks(path)); }

/// Common run bookkeeping for subcommands that write an output file.
struct Run {
  RunManifest manifest;
  Stopwatch clock;
  std::string config_path;

  void note_config() {
    if (!config_path.empty()) manifest.hash_config_file(config_path);
  }

  void finish(const std::string& output) {
    note_config();
    manifest.artifacts["output"] = output;
    manifest.duration_seconds = clock.seconds();
    manifest.write_for(output);
  }
};

/// TOML reader that scopes unsectioned keys to the subcommand being run, so a
/// plain `epochs = 2` in a file passed to `train-head` sets train-head's flag.
class SubcommandConfig : public CLI::ConfigTOML {
 public:
  explicit SubcommandConfig(std::vector<std::string> path) : path_(std::move(path)) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigTOML::from_config(input);
    for (auto& item : items) {
      if (item.parents.empty()) item.parents = path_;
    }
    return items;
  }

 private:
  std::vector<std::string> path_;
};

/// Leading argv words that name (nested) subcommands.
std::vector<std::string> subcommand_path(CLI::App& app, int argc, char** argv) {
  std::vector<std::string> path;
  CLI::App* cur = &app;
  for (int i = 1; i < argc; ++i) {
    CLI::App* next = nullptr;
    for (auto* sub : cur->get_subcommands({})) {
      if (sub->get_name() == argv[i]) next = sub;
    }
    if (!next) break;
    path.emplace_back(argv[i]);
    cur = next;
  }
  return path;
}

/// 1 for bad input (including malformed input files), 2 for runtime failures.
int exit_code(const Error& e) {
  switch (e.code()) {
    case Errc::parse_error:
    case Errc::bad_magic:
    case Errc::version_mismatch:
    case Errc::truncated:
      return 1;
    default:
      return e.is_validation() ? 1 : 2;
  }
}

std::vector<std::size_t> parse_ladder_or_default(const std::vector<std::size_t>& dims) {
  return dims.empty() ? DimensionLadder{}.dims() : dims;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-modal retrieval-augmented generation toolkit", "mrag"};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);
  auto* config_opt = app.set_config("--config", "", "TOML file with option values (flags take precedence)");
  app.set_version_flag("--version", std::string(kVersion));

  Run run;
  for (int i = 0; i < argc; ++i) run.manifest.command_line.emplace_back(argv[i]);
  Backends backends;
  std::size_t jobs = default_jobs();
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--jobs", jobs, "Worker threads")->capture_default_str();
  };
  std::function<void()> action;

  // chunk ------------------------------------------------------------------
  std::string in_path, out_path, report_path;
  std::size_t max_tokens = 200;
  bool lenient = false;
  auto* chunk = app.add_subcommand("chunk", "Split a corpus into chunks");
  chunk->add_option("--in", in_path, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  chunk->add_option("--out", out_path, "Chunk JSONL")->required();
  chunk->add_option("--max-tokens", max_tokens, "Text tokens per chunk")->capture_default_str();
  chunk->add_flag("--lenient", lenient, "Skip malformed lines instead of failing");
  add_common(chunk);
  chunk->callback([&] {
    action = [&] {
      IngestReport rep;
      auto store = ingest_corpus(in_path, lenient ? Strictness::lenient : Strictness::strict, &rep);
      for (const auto& e : rep.skipped) std::cerr << in_path << ":" << e.line << ": skipped: " << e.message << "\n";
      ChunkerConfig cfg;
      cfg.max_text_tokens = max_tokens;
      auto chunks = segment_corpus(store.documents(), cfg, jobs);
      write_chunks(out_path, chunks);
      std::cerr << "chunked " << store.document_count() << " documents into " << chunks.size() << " chunks\n";
      run.manifest.artifacts["corpus"] = in_path;
      run.finish(out_path);
    };
  });

  // sample -----------------------------------------------------------------
  std::size_t sample_n = 0;
  std::uint64_t seed = 0;
  auto* sample = app.add_subcommand("sample", "Stratified sample of chunks by modality profile");
  sample->add_option("--in", in_path, "Chunk JSONL")->required()->check(CLI::ExistingFile);
  sample->add_option("--n", sample_n, "Sample size")->required();
  sample->add_option("--seed", seed, "Random seed")->capture_default_str();
  sample->add_option("--out", out_path, "Sampled chunk JSONL")->required();
  add_common(sample);
  sample->callback([&] {
    action = [&] {
      auto chunks = read_chunks(in_path);
      auto picked = stratified_sample(chunks, sample_n, seed);
      write_chunks(out_path, picked);
      std::cerr << "sampled " << picked.size() << " of " << chunks.size() << " chunks\n";
      run.manifest.seeds["sample"] = seed;
      run.manifest.artifacts["chunks"] = in_path;
      run.finish(out_path);
    };
  });

  // embed ------------------------------------------------------------------
  std::size_t dim = 0;
  std::vector<std::size_t> ladder_dims;
  auto* embed_cmd = app.add_subcommand("embed", "Embed chunks as documents");
  embed_cmd->add_option("--in", in_path, "Chunk JSONL")->required()->check(CLI::ExistingFile);
  embed_cmd->add_option("--out", out_path, "Embedding file (MRLE)")->required();
  embed_cmd->add_option("--dim", dim, "Output dimension (default: ladder's full dimension)");
  embed_cmd->add_option("--ladder", ladder_dims, "Dimension ladder, largest first")->delimiter(',');
  embed_cmd->add_option("--endpoint", backends.embed_endpoint, "Embedding service base URL");
  embed_cmd->add_option("--head", backends.head_path, "Projection head applied on top of the base embedder");
  add_remote_options(embed_cmd, backends);
  add_common(embed_cmd);
  embed_cmd->callback([&] {
    action = [&] {
      std::vector<std::size_t> dims = ladder_dims;
      if (dims.empty()) dims = (dim == 0 || dim == DimensionLadder{}.full()) ? DimensionLadder{}.dims()
                                                                             : std::vector<std::size_t>{dim};
      const DimensionLadder ladder(dims);
      if (dim != 0 && dim != ladder.full()) {
        fail(Errc::invalid_input, "--dim " + std::to_string(dim) + " differs from the ladder's full dimension " +
                                      std::to_string(ladder.full()));
      }
      auto emb = open_embedder(backends);
      auto chunks = read_chunks(in_path);
      auto rows = embed_chunks(chunks, emb.get(), ladder);
      save_embeddings(out_path, rows);
      std::cerr << "embedded " << rows.size() << " chunks at dim " << ladder.full() << "\n";
      run.manifest.endpoints["embedder"] = emb.get().identity();
      run.manifest.artifacts["chunks"] = in_path;
      run.finish(out_path);
    };
  });

  // index ------------------------------------------------------------------
  auto* index_cmd = app.add_subcommand("index", "Build or query a dense index");
  index_cmd->require_subcommand(1);
  std::string emb_path, index_path, query_path;
  auto* index_build = index_cmd->add_subcommand("build", "Build an index from an embedding file");
  index_build->add_option("--emb", emb_path, "Embedding file (MRLE)")->required()->check(CLI::ExistingFile);
  index_build->add_option("--out", out_path, "Index file (MRLX)")->required();
  index_build->add_option("--ladder", ladder_dims, "Dimension ladder, largest first")->delimiter(',');
  add_common(index_build);
  index_build->callback([&] {
    action = [&] {
      auto rows = load_embeddings(emb_path);
      require(!rows.empty(), Errc::empty_input, emb_path + " holds no embeddings");
      std::vector<std::size_t> dims = ladder_dims;
      if (dims.empty()) {
        dims = rows.front().second.dim() == DimensionLadder{}.full() ? DimensionLadder{}.dims()
                                                                     : std::vector<std::size_t>{rows.front().second.dim()};
      }
      auto index = DenseIndex::build(std::move(rows), DimensionLadder(dims));
      index.save(out_path);
      std::cerr << "indexed " << index.size() << " vectors at dim " << index.full_dim() << "\n";
      run.manifest.artifacts["embeddings"] = emb_path;
      run.finish(out_path);
    };
  });

  std::size_t k = 10, coarse_dim = 0, m = 8;
  auto* index_search = index_cmd->add_subcommand("search", "Search an index with query payloads");
  index_search->add_option("--index", index_path, "Index file (MRLX)")->required()->check(CLI::ExistingFile);
  index_search->add_option("--query-file", query_path, "JSONL of {\"qid\"?, \"elements\"} or QA records")
      ->required()
      ->check(CLI::ExistingFile);
  index_search->add_option("--dim", dim, "Search dimension (default: full)");
  index_search->add_option("--k", k, "Hits per query")->capture_default_str();
  index_search->add_option("--coarse-dim", coarse_dim, "Run two-stage search with this coarse dimension");
  index_search->add_option("--m", m, "Candidate multiplier for two-stage search")->capture_default_str();
  index_search->add_option("--out", out_path, "Output JSONL (default: stdout)");
  add_embed_options(index_search, backends, true);
  add_remote_options(index_search, backends);
  add_common(index_search);
  index_search->callback([&] {
    action = [&] {
      auto index = DenseIndex::load(index_path);
      auto emb = open_embedder(backends);
      struct Query {
        std::string qid;
        Payload elements;
      };
      std::size_t line = 0;
      auto queries = read_jsonl(query_path, [&](const Json& j) {
        ++line;
        Query q;
        q.qid = json_opt_string(j, "qid").value_or(std::to_string(line));
        q.elements = payload_from_json(j.contains("question_elements") ? j.at("question_elements")
                                                                       : json_field(j, "elements"));
        return q;
      }).records;
      std::vector<Payload> payloads;
      for (const auto& q : queries) payloads.push_back(q.elements);
      require(!payloads.empty(), Errc::empty_input, query_path + " holds no queries");
      auto vecs = embed(emb.get(), payloads, EmbedRole::query, backends.instruction, index.ladder());
      std::vector<Json> out;
      for (std::size_t i = 0; i < queries.size(); ++i) {
        auto hits = coarse_dim ? index.coarse_to_fine(vecs[i], k, coarse_dim, m)
                               : index.search(vecs[i], k, dim ? dim : index.full_dim());
        Json j;
        j["qid"] = queries[i].qid;
        j["hits"] = Json::array();
        for (const auto& h : hits) j["hits"].push_back({{"id", h.chunk_id}, {"score", h.score}, {"rank", h.rank}});
        out.push_back(std::move(j));
      }
      if (out_path.empty()) {
        for (const auto& j : out) std::cout << j.dump() << "\n";
      } else {
        write_jsonl(out_path, out, [](const Json& j) { return j; });
        run.manifest.endpoints["embedder"] = emb.get().identity();
        run.manifest.artifacts["index"] = index_path;
        run.manifest.artifacts["queries"] = query_path;
        run.finish(out_path);
      }
    };
  });

  // synth-qa ---------------------------------------------------------------
  std::string chunks_path, prompts_dir;
  std::size_t max_pairs = 5;
  auto* synth = app.add_subcommand("synth-qa", "Generate, filter, refine and complete QA items from chunks");
  synth->add_option("--chunks", chunks_path, "Chunk JSONL")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", out_path, "QA JSONL")->required();
  synth->add_option("--report", report_path, "Drop report JSON (default: <out>.report.json)");
  synth->add_option("--seed", seed, "Option shuffling seed")->capture_default_str();
  synth->add_option("--max-pairs", max_pairs, "QA pairs kept per chunk")->capture_default_str();
  synth->add_option("--prompts", prompts_dir, "Directory with prompt templates (default: built in)");
  add_generator_options(synth, backends);
  add_remote_options(synth, backends);
  add_common(synth);
  synth->callback([&] {
    action = [&] {
      auto gen = open_generator(backends);
      auto chunks = read_chunks(chunks_path);
      DatagenConfig cfg;
      cfg.max_pairs = max_pairs;
      cfg.seed = seed;
      cfg.prompts = load_prompts(prompts_dir);
      cfg.jobs = jobs;
      auto result = synthesize_qa(chunks, *gen, cfg);
      write_jsonl(out_path, result.items, qa_to_json);
      const std::string rp = report_path.empty() ? out_path + ".report.json" : report_path;
      std::ofstream(rp, std::ios::binary) << result.report.to_json().dump(2) << "\n";
      std::cerr << "synthesized " << result.items.size() << " items from " << result.report.raw_pairs
                << " raw pairs (" << result.report.parse_failures << " chunks unparseable)\n";
      run.manifest.seeds["options"] = seed;
      run.manifest.endpoints["generator"] = gen->identity();
      run.manifest.hash_prompts(cfg.prompts);
      run.manifest.artifacts["chunks"] = chunks_path;
      run.manifest.artifacts["report"] = rp;
      run.finish(out_path);
    };
  });

  // mine-negatives ---------------------------------------------------------
  std::string qa_path;
  std::size_t top = 10, n_neg = 5;
  auto* mine = app.add_subcommand("mine-negatives", "Mine hard negatives and write contrastive triplets");
  mine->add_option("--qa", qa_path, "QA JSONL")->required()->check(CLI::ExistingFile);
  mine->add_option("--index", index_path, "Index file (MRLX)")->required()->check(CLI::ExistingFile);
  mine->add_option("--top", top, "Retrieval depth")->capture_default_str();
  mine->add_option("--n", n_neg, "Negatives per item")->capture_default_str();
  mine->add_option("--dim", dim, "Retrieval dimension (default: full)");
  mine->add_option("--out", out_path, "Triplet JSONL")->required();
  mine->add_option("--report", report_path, "Drop report JSON (default: <out>.report.json)");
  add_embed_options(mine, backends, true);
  add_remote_options(mine, backends);
  add_common(mine);
  mine->callback([&] {
    action = [&] {
      auto index = DenseIndex::load(index_path);
      auto emb = open_embedder(backends);
      auto items = load_qa(qa_path);
      auto retriever = make_dense_retriever(index, emb.get(), backends.instruction,
                                            dim ? std::optional<std::size_t>(dim) : std::nullopt);
      DatagenReport report;
      auto mined = mine_negatives(items, retriever, top, n_neg, report, jobs);
      std::map<std::string, const QAItem*> by_qid;
      for (const auto& it : items) by_qid[it.qid] = &it;
      std::vector<ContrastiveTriplet> triplets;
      for (const auto& t : mined.triplets) triplets.push_back(to_contrastive(t, *by_qid.at(t.qid), backends.instruction));
      write_jsonl(out_path, triplets, triplet_to_json);
      const std::string rp = report_path.empty() ? out_path + ".report.json" : report_path;
      std::ofstream(rp, std::ios::binary) << report.to_json().dump(2) << "\n";
      std::cerr << "mined " << triplets.size() << " triplets from " << items.size() << " items\n";
      run.manifest.endpoints["embedder"] = emb.get().identity();
      run.manifest.artifacts["qa"] = qa_path;
      run.manifest.artifacts["index"] = index_path;
      run.manifest.artifacts["report"] = rp;
      run.finish(out_path);
    };
  });

  // train-head -------------------------------------------------------------
  std::string triplets_path, log_path;
  std::size_t in_dim = 256;
  double temperature = 0.02;
  std::vector<double> weights;
  TrainOptions train_opt;
  bool full_only = false;
  auto* train = app.add_subcommand("train-head", "Train a projection head with the multi-dimension InfoNCE loss");
  train->add_option("--triplets", triplets_path, "Triplet JSONL")->required()->check(CLI::ExistingFile);
  train->add_option("--chunks", chunks_path, "Chunk JSONL resolving triplet ids")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out_path, "Head file (MRLH)")->required();
  train->add_option("--log", log_path, "Training log JSONL (default: <out>.log.jsonl)");
  train->add_option("--seed", seed, "Initialisation and shuffling seed")->capture_default_str();
  train->add_option("--in-dim", in_dim, "Base embedding dimension")->capture_default_str();
  train->add_option("--ladder", ladder_dims, "Output ladder, largest first (default 2048,1024,512,256)")->delimiter(',');
  train->add_option("--weights", weights, "Per-rung loss weights (default 1,1,0.2,0.2)")->delimiter(',');
  train->add_option("--temperature", temperature, "InfoNCE temperature")->capture_default_str();
  train->add_flag("--full-only", full_only, "Train on the full dimension only");
  train->add_option("--epochs", train_opt.epochs, "Epochs")->capture_default_str();
  train->add_option("--lr", train_opt.learning_rate, "Learning rate")->capture_default_str();
  train->add_option("--batch", train_opt.batch_size, "Triplets per update")->capture_default_str();
  train->add_option("--embed-endpoint", backends.embed_endpoint, "Embedding service base URL for base features");
  add_remote_options(train, backends);
  add_common(train);
  train->callback([&] {
    action = [&] {
      const DimensionLadder ladder(parse_ladder_or_default(ladder_dims));
      LossConfig cfg;
      cfg.temperature = temperature;
      cfg.ladder = ladder;
      if (!weights.empty()) {
        cfg.raw_weights = weights;
      } else if (ladder.size() != 4) {
        cfg.raw_weights.assign(ladder.size(), 1.0);
      }
      if (full_only) cfg = LossConfig::full_only(ladder.full(), temperature);
      cfg.validate();
      train_opt.seed = seed;
      train_opt.jobs = jobs;

      auto triplets = read_jsonl(triplets_path, triplet_from_json).records;
      auto store = load_chunk_store(chunks_path);
      auto emb = open_embedder(backends);
      auto features = triplet_features(triplets, store, emb.get(), in_dim);
      auto result = train_head(features, ProjectionHead::random(ladder.full(), in_dim, seed), cfg, train_opt);
      result.head.save(out_path);
      const std::string lp = log_path.empty() ? out_path + ".log.jsonl" : log_path;
      write_jsonl(lp, result.log, [](const EpochLog& e) { return Json{{"epoch", e.epoch}, {"mean_loss", e.mean_loss}}; });
      std::cerr << "trained head " << ladder.full() << "x" << in_dim << ": loss " << result.log.front().mean_loss
                << " -> " << result.log.back().mean_loss << "\n";
      run.manifest.seeds["train"] = seed;
      run.manifest.endpoints["embedder"] = emb.get().identity();
      run.manifest.artifacts["triplets"] = triplets_path;
      run.manifest.artifacts["chunks"] = chunks_path;
      run.manifest.artifacts["log"] = lp;
      run.finish(out_path);
    };
  });

  // feedback ---------------------------------------------------------------
  FeedbackConfig fb_cfg;
  std::string metric_name = "em";
  auto* feedback = app.add_subcommand("feedback", "Build preference records by sliding-window generator probing");
  feedback->add_option("--qa", qa_path, "QA JSONL")->required()->check(CLI::ExistingFile);
  feedback->add_option("--index", index_path, "Index file (MRLX)")->required()->check(CLI::ExistingFile);
  feedback->add_option("--chunks", chunks_path, "Chunk JSONL with the indexed chunks")->required()->check(CLI::ExistingFile);
  feedback->add_option("--k", fb_cfg.K, "Retrieved documents per query")->capture_default_str();
  feedback->add_option("--l", fb_cfg.L, "Window length")->capture_default_str();
  feedback->add_option("--stride", fb_cfg.stride, "Window stride")->capture_default_str();
  feedback->add_option("--metric", metric_name, "em, f1 or acc")->capture_default_str();
  feedback->add_option("--threshold", fb_cfg.threshold, "Score a window must reach")->capture_default_str();
  feedback->add_option("--prompts", prompts_dir, "Directory with prompt templates (default: built in)");
  feedback->add_option("--out", out_path, "Preference JSONL")->required();
  add_generator_options(feedback, backends);
  add_embed_options(feedback, backends, true);
  add_remote_options(feedback, backends);
  add_common(feedback);
  feedback->callback([&] {
    action = [&] {
      fb_cfg.metric = parse_metric(metric_name);
      fb_cfg.jobs = jobs;
      const PromptSet prompts = load_prompts(prompts_dir);
      fb_cfg.prompt_template = prompts.context;
      fb_cfg.validate();
      auto gen = open_generator(backends);
      auto index = DenseIndex::load(index_path);
      auto emb = open_embedder(backends);
      auto store = load_chunk_store(chunks_path);
      auto items = load_qa(qa_path);
      auto retriever = make_dense_retriever(index, emb.get(), backends.instruction);
      auto result = build_preference_dataset(items, retriever, store, *gen, fb_cfg);
      write_jsonl(out_path, result.records, preference_to_json);
      std::vector<Json> log;
      for (const auto& e : result.log) log.push_back({{"qid", e.qid}, {"kind", e.kind}, {"detail", e.detail}});
      write_jsonl(out_path + ".log.jsonl", log, [](const Json& j) { return j; });
      std::cerr << "built " << result.records.size() << " preference records from " << result.queries
                << " queries (" << result.generator_calls << " generator calls)\n";
      run.manifest.endpoints["generator"] = gen->identity();
      run.manifest.endpoints["embedder"] = emb.get().identity();
      run.manifest.hash_prompts(prompts);
      run.manifest.artifacts["qa"] = qa_path;
      run.manifest.artifacts["index"] = index_path;
      run.manifest.artifacts["chunks"] = chunks_path;
      run.finish(out_path);
    };
  });

  // eval -------------------------------------------------------------------
  std::string dataset_name;
  std::size_t eval_k = 1;
  bool keep_articles = false;
  auto* eval = app.add_subcommand("eval", "Retrieval-augmented answering with EM/F1/accuracy scoring");
  eval->add_option("--qa", qa_path, "QA JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--index", index_path, "Index file (MRLX)")->check(CLI::ExistingFile);
  eval->add_option("--chunks", chunks_path, "Chunk JSONL with the indexed chunks")->check(CLI::ExistingFile);
  eval->add_option("--k", eval_k, "Documents per query; 0 answers without retrieval")->capture_default_str();
  eval->add_option("--dataset", dataset_name, "Dataset name in the report (default: QA file stem)");
  eval->add_option("--prompts", prompts_dir, "Directory with prompt templates (default: built in)");
  eval->add_flag("--keep-articles", keep_articles, "Do not strip a/an/the when normalizing answers");
  eval->add_option("--out", out_path, "Report JSON")->required();
  add_generator_options(eval, backends);
  add_embed_options(eval, backends, true);
  add_remote_options(eval, backends);
  add_common(eval);
  eval->callback([&] {
    action = [&] {
      if (eval_k > 0 && (index_path.empty() || chunks_path.empty())) {
        fail(Errc::invalid_input, "--index and --chunks are required when --k > 0");
      }
      auto gen = open_generator(backends);
      const PromptSet prompts = load_prompts(prompts_dir);
      EvalConfig cfg;
      cfg.context_template = prompts.context;
      cfg.direct_template = prompts.direct;
      cfg.normalize.remove_articles = !keep_articles;
      cfg.jobs = jobs;
      auto items = load_qa(qa_path);
      std::optional<DenseIndex> index;
      CorpusStore store;
      EmbedderStack emb;
      Retriever retriever = [](const Payload&, std::size_t) { return std::vector<SearchHit>{}; };
      if (eval_k > 0) {
        index = DenseIndex::load(index_path);
        store = load_chunk_store(chunks_path);
        emb = open_embedder(backends);
        retriever = make_dense_retriever(*index, emb.get(), backends.instruction);
        run.manifest.endpoints["embedder"] = emb.get().identity();
        run.manifest.artifacts["index"] = index_path;
        run.manifest.artifacts["chunks"] = chunks_path;
      }
      const std::string name = dataset_name.empty() ? fs::path(qa_path).stem().string() : dataset_name;
      auto report = run_rag_eval(name, items, retriever, store, *gen, eval_k, cfg);
      run.manifest.endpoints["generator"] = gen->identity();
      run.manifest.hash_prompts(prompts);
      run.manifest.artifacts["qa"] = qa_path;
      run.note_config();
      run.manifest.artifacts["output"] = out_path;
      run.manifest.duration_seconds = run.clock.seconds();
      report.manifest = run.manifest.to_json();
      std::ofstream(out_path, std::ios::binary) << report.to_json().dump(2) << "\n";
      run.manifest.write_for(out_path);
      std::printf("%s k=%zu n=%zu em=%.4f f1=%.4f acc=%.4f\n", name.c_str(), eval_k, report.queries.size(),
                  report.aggregates.em, report.aggregates.f1, report.aggregates.acc);
    };
  });

  // mcnemar ----------------------------------------------------------------
  PairedOutcomes outcomes;
  bool continuity = false;
  auto* mc = app.add_subcommand("mcnemar", "McNemar's test on paired correctness counts");
  mc->add_option("--a", outcomes.a, "Both systems correct")->required();
  mc->add_option("--b", outcomes.b, "Only system A correct")->required();
  mc->add_option("--c", outcomes.c, "Only system B correct")->required();
  mc->add_option("--d", outcomes.d, "Both systems wrong")->required();
  mc->add_flag("--continuity", continuity, "Report only the continuity-corrected statistic");
  mc->callback([&] {
    action = [&] {
      auto print = [&](const char* label, bool corrected) {
        const auto r = mcnemar(outcomes, corrected);
        std::printf("%-12s statistic=%.6f p=%.6g df=%d\n", label, r.statistic, r.p_value, r.df);
      };
      std::printf("n=%llu b=%llu c=%llu\n", static_cast<unsigned long long>(outcomes.total()),
                  static_cast<unsigned long long>(outcomes.b), static_cast<unsigned long long>(outcomes.c));
      if (!continuity) print("uncorrected", false);
      print("corrected", true);
    };
  });

  // make-demo --------------------------------------------------------------
  std::string out_dir;
  std::size_t demo_docs = 200;
  std::uint64_t demo_seed = 7;
  auto* make_demo = app.add_subcommand("make-demo", "Write the synthetic demo corpus and its scripted fixtures");
  make_demo->add_option("--out-dir", out_dir, "Destination directory")->required();
  make_demo->add_option("--docs", demo_docs, "Number of documents")->capture_default_str();
  make_demo->add_option("--seed", demo_seed, "Corpus seed")->capture_default_str();
  make_demo->callback([&] {
    action = [&] {
      fs::create_directories(out_dir);
      auto corpus = demo::make_corpus(demo_docs, demo_seed);
      write_corpus(out_dir + "/demo_corpus.jsonl", corpus.docs);
      std::ofstream(out_dir + "/demo_fixtures.json", std::ios::binary)
          << demo::make_generator(corpus).to_json().dump(1) << "\n";
      std::cerr << "wrote " << corpus.docs.size() << " documents to " << out_dir << "\n";
    };
  });

  const auto path = subcommand_path(app, argc, argv);
  if (path.empty() && argc > 1 && argv[1][0] != '-') {
    std::cerr << "unknown subcommand: " << argv[1] << "\n\n" << app.help();
    return 1;
  }
  app.config_formatter(std::make_shared<SubcommandConfig>(path));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (config_opt->count() > 0) run.config_path = config_opt->as<std::string>();

  try {
    if (action) action();
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
