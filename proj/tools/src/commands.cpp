#include "endgen/cli/commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>

#include "endgen/checkpoint.hpp"
#include "endgen/cli/run_config.hpp"
#include "endgen/corpus.hpp"
#include "endgen/errors.hpp"
#include "endgen/metrics.hpp"
#include "endgen/train.hpp"

namespace endgen::cli {

namespace {

namespace fs = std::filesystem;

struct Common {
  std::optional<std::string> config_file;
  std::vector<std::string> overrides;
  const char* env_seed = nullptr;

  RunConfig resolve(std::ostream& out) const {
    std::optional<fs::path> file;
    if (config_file) file = *config_file;
    RunConfig c = resolve_run_config(file, overrides, env_seed);
    out << "config: " << to_json(c).dump() << "\n";
    return c;
  }
};

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw UsageError(what + " path is not set");
  if (!fs::exists(path)) throw UsageError(what + " not found: " + path);
}

std::vector<corpus::Story> read_split(const std::string& path, const char* split) {
  require_file(path, std::string(split) + " CSV");
  return corpus::parse_corpus(fs::path(path), split);
}

corpus::Vocabulary read_vocab(const RunConfig& c) {
  require_file(c.vocab, "vocabulary file (run build-vocab first)");
  return corpus::Vocabulary::load(c.vocab);
}

std::string hex(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

class LogSink {
 public:
  LogSink(std::ostream& out, const fs::path& file) : out_(out), file_(file, std::ios::app) {
    if (!file_) throw UsageError("cannot open log file " + file.string());
  }
  void line(const std::string& text) {
    out_ << text << "\n";
    file_ << text << "\n";
    file_.flush();
  }

 private:
  std::ostream& out_;
  std::ofstream file_;
};

train::TrainHooks logging_hooks(LogSink& log, const fs::path& dir) {
  train::TrainHooks hooks;
  hooks.checkpoint_dir = dir;
  hooks.on_eval = [&log](const train::EvalPoint& p) { log.line(train::format_log_line(p)); };
  hooks.on_epoch = [&log](std::size_t epoch, double loss) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "epoch=%zu mean_loss=%.6f", epoch + 1, loss);
    log.line(buf);
  };
  return hooks;
}

// --- subcommands ------------------------------------------------------------

int cmd_build_vocab(const Common& common, std::ostream& out) {
  const RunConfig c = common.resolve(out);
  const auto stories = read_split(c.train_csv, "train");
  const corpus::Vocabulary vocab = corpus::build_vocab(stories, c.train.vocab_cap);
  const fs::path path(c.vocab);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  vocab.save(path);
  out << "stories=" << stories.size() << " distinct_tokens=" << corpus::distinct_token_count(stories)
      << " with_specials=" << corpus::distinct_token_count(stories) + corpus::kNumSpecials
      << " vocab_size=" << vocab.size() << " hash=" << hex(vocab.hash()) << " path=" << c.vocab << "\n";
  return kExitOk;
}

int cmd_pretrain(const Common& common, bool resume, std::size_t max_steps, std::ostream& out) {
  const RunConfig c = common.resolve(out);
  const corpus::Vocabulary vocab = read_vocab(c);
  const auto train_stories = read_split(c.train_csv, "train");
  std::vector<corpus::Story> val_stories;
  if (!c.val_csv.empty()) val_stories = read_split(c.val_csv, "validation");

  const fs::path dir(c.checkpoint_dir);
  fs::create_directories(dir);
  train::Checkpoint state;
  if (resume && fs::exists(dir / "last.ckpt")) {
    state = train::load_checkpoint(dir / "last.ckpt");
    out << "resuming from " << (dir / "last.ckpt").string() << " at step " << state.progress.global_step << "\n";
  } else {
    state = train::initial_checkpoint(c.train, vocab, c.vocab);
  }
  const auto train_ex = train::encode_all(train_stories, vocab, state.config);
  const auto val_ex = train::encode_all(val_stories, vocab, state.config);

  LogSink log(out, dir / "train.log");
  train::TrainHooks hooks = logging_hooks(log, dir);
  hooks.max_steps = max_steps;
  const train::TrainResult r = train::run_pretrain(std::move(state), train_ex, val_ex, vocab, hooks);
  out << "finished pretraining: steps=" << r.last.progress.global_step << " epochs=" << r.last.progress.epoch
      << " best=" << (dir / "best.ckpt").string() << " last=" << (dir / "last.ckpt").string() << "\n";
  return kExitOk;
}

int cmd_finetune(const Common& common, std::optional<std::string> init, std::ostream& out) {
  const RunConfig c = common.resolve(out);
  const fs::path init_path = init                        ? fs::path(*init)
                             : !c.init_checkpoint.empty() ? fs::path(c.init_checkpoint)
                                                          : fs::path(c.checkpoint_dir) / "best.ckpt";
  if (!fs::exists(init_path)) throw UsageError("pre-trained checkpoint not found: " + init_path.string());
  const corpus::Vocabulary vocab = read_vocab(c);
  const auto train_stories = read_split(c.train_csv, "train");
  std::vector<corpus::Story> val_stories;
  if (!c.val_csv.empty()) val_stories = read_split(c.val_csv, "validation");

  const train::Checkpoint pretrained = train::load_checkpoint(init_path);
  if (pretrained.vocab_hash != vocab.hash()) {
    throw UsageError("vocabulary " + c.vocab + " does not match checkpoint " + init_path.string());
  }
  train::Checkpoint state = train::finetune_start(pretrained, c.train);
  const auto train_ex = train::encode_all(train_stories, vocab, c.train);
  const auto val_ex = train::encode_all(val_stories, vocab, c.train);

  const fs::path dir = fs::path(c.checkpoint_dir) / "finetune";
  fs::create_directories(dir);
  LogSink log(out, dir / "train.log");
  const train::TrainResult r = train::run_finetune(std::move(state), train_ex, val_ex, vocab, logging_hooks(log, dir));
  out << "finished fine-tuning: steps=" << r.last.progress.global_step << " best=" << (dir / "best.ckpt").string()
      << " last=" << (dir / "last.ckpt").string() << "\n";
  return kExitOk;
}

int cmd_generate(const Common& common, std::optional<std::string> checkpoint, const std::string& input,
                 const std::string& output, std::optional<std::size_t> beam, std::ostream& out) {
  const RunConfig c = common.resolve(out);
  const fs::path ckpt_path = checkpoint ? fs::path(*checkpoint) : fs::path(c.checkpoint_dir) / "best.ckpt";
  if (!fs::exists(ckpt_path)) throw UsageError("checkpoint not found: " + ckpt_path.string());
  train::Checkpoint ckpt = train::load_checkpoint(ckpt_path);
  if (ckpt.params.config.hidden_dim != c.train.hidden_dim || ckpt.params.config.embed_dim != c.train.embed_dim) {
    throw UsageError("checkpoint " + ckpt_path.string() + " was trained with hidden_dim=" +
                     std::to_string(ckpt.params.config.hidden_dim) + " embed_dim=" +
                     std::to_string(ckpt.params.config.embed_dim) + ", config asks for hidden_dim=" +
                     std::to_string(c.train.hidden_dim) + " embed_dim=" + std::to_string(c.train.embed_dim));
  }
  const corpus::Vocabulary vocab = read_vocab(c);
  if (vocab.hash() != ckpt.vocab_hash) {
    throw UsageError("vocabulary " + c.vocab + " does not match checkpoint " + ckpt_path.string());
  }
  const auto stories = read_split(input, "input");

  train::TrainConfig decode_cfg = ckpt.config;
  decode_cfg.max_plot_len = c.train.max_plot_len;
  decode_cfg.max_end_len = c.train.max_end_len;
  decode_cfg.suppress_unk = c.train.suppress_unk;
  decode_cfg.length_normalize = c.train.length_normalize;
  const std::size_t width = beam ? *beam : c.train.beam;
  if (width == 0) throw UsageError("--beam must be positive");

  const auto examples = train::encode_all(stories, vocab, decode_cfg);
  const auto endings =
      train::generate_endings(ckpt.params, vocab, examples, decode_cfg, width, train::coverage_active(ckpt));
  const fs::path out_path(output);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  std::ofstream file(out_path, std::ios::binary | std::ios::trunc);
  if (!file) throw UsageError("cannot write " + output);
  for (const auto& e : endings) file << corpus::detokenize(e) << "\n";
  out << "wrote " << endings.size() << " endings to " << output << " (beam " << width << ")\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& hyp_path, const std::string& refs_path, std::optional<std::string> vectors_path,
                 std::optional<std::string> json_path, std::ostream& out, std::ostream& err) {
  require_file(hyp_path, "hypothesis file");
  const auto stories = read_split(refs_path, "reference");
  std::vector<corpus::Tokens> hyps, refs;
  {
    std::ifstream in(hyp_path, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      hyps.push_back(corpus::tokenize(line));
    }
  }
  for (const auto& s : stories) refs.push_back(s.ending);
  if (hyps.size() != refs.size()) {
    throw UsageError(hyp_path + " has " + std::to_string(hyps.size()) + " lines but " + refs_path + " has " +
                     std::to_string(refs.size()) + " stories");
  }

  std::optional<metrics::WordVectorTable> vectors;
  if (vectors_path) {
    if (fs::exists(*vectors_path)) {
      vectors = metrics::WordVectorTable::load(*vectors_path);
    } else {
      err << "warning: word-vector file not found: " << *vectors_path << "; embedding metrics omitted\n";
    }
  }
  const metrics::MetricReport report = metrics::evaluate(hyps, refs, vectors ? &*vectors : nullptr);
  out << report.to_text();
  const std::string target = json_path ? *json_path : hyp_path + ".metrics.json";
  std::ofstream js(target, std::ios::trunc);
  if (!js) throw UsageError("cannot write " + target);
  js << report.to_json() << "\n";
  return kExitOk;
}

int cmd_inspect(const std::string& path, std::ostream& out) {
  if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path);
  const std::string header = train::read_checkpoint_header(path);
  out << nlohmann::json::parse(header).dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const char* env_seed) {
  CLI::App app{"Story-ending generation: vocabulary, training, decoding and evaluation", "endgen"};
  app.require_subcommand(1);
  Common common;
  common.env_seed = env_seed;
  app.add_option("-c,--config", common.config_file, "JSON run configuration");
  app.add_option("--set", common.overrides, "Override a config key (key=value), repeatable");

  auto* vocab_cmd = app.add_subcommand("build-vocab", "Build the vocabulary from the training CSV");

  auto* pre = app.add_subcommand("pretrain", "Teacher-forced pre-training");
  bool resume = false;
  std::size_t max_steps = 0;
  pre->add_flag("--resume", resume, "Continue from <checkpoint_dir>/last.ckpt when present");
  pre->add_option("--max-steps", max_steps, "Stop after this many global steps (0 = no limit)");

  auto* fine = app.add_subcommand("finetune", "Self-critical fine-tuning of a pre-trained model");
  std::optional<std::string> init;
  fine->add_option("--init", init, "Pre-trained checkpoint (default <checkpoint_dir>/best.ckpt)");

  auto* gen = app.add_subcommand("generate", "Decode endings for a CSV of stories");
  std::optional<std::string> gen_ckpt;
  std::string gen_input, gen_output;
  std::optional<std::size_t> gen_beam;
  gen->add_option("--checkpoint", gen_ckpt, "Checkpoint (default <checkpoint_dir>/best.ckpt)");
  gen->add_option("-i,--input", gen_input, "Input CSV")->required();
  gen->add_option("-o,--output", gen_output, "Output file, one ending per line")->required();
  gen->add_option("--beam", gen_beam, "Beam width (1 = greedy)");

  auto* eval = app.add_subcommand("evaluate", "Score generated endings against reference endings");
  std::string hyp_path, refs_path;
  std::optional<std::string> vectors_path, json_path;
  eval->add_option("--hyp", hyp_path, "Generated endings, one per line")->required();
  eval->add_option("--refs", refs_path, "CSV holding the reference endings")->required();
  eval->add_option("--vectors", vectors_path, "Word-vector text file for embedding metrics");
  eval->add_option("--json", json_path, "Where to write the JSON report (default <hyp>.metrics.json)");

  auto* inspect = app.add_subcommand("inspect", "Print a checkpoint header");
  std::string inspect_path;
  inspect->add_option("checkpoint", inspect_path, "Checkpoint file")->required();

  for (auto* sub : {vocab_cmd, pre, fine, gen, eval, inspect}) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*vocab_cmd) return cmd_build_vocab(common, out);
    if (*pre) return cmd_pretrain(common, resume, max_steps, out);
    if (*fine) return cmd_finetune(common, init, out);
    if (*gen) return cmd_generate(common, gen_ckpt, gen_input, gen_output, gen_beam, out);
    if (*eval) return cmd_evaluate(hyp_path, refs_path, vectors_path, json_path, out, err);
    if (*inspect) return cmd_inspect(inspect_path, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace endgen::cli
