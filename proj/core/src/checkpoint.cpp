#include "endgen/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <sstream>

#include "endgen/errors.hpp"

namespace endgen::train {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

using json = nlohmann::json;

constexpr char kMagic[8] = {'E', 'N', 'D', 'G', 'E', 'N', 'C', 'K'};
constexpr std::uint8_t kDtype = sizeof(Real) == 8 ? 0 : 1;

// --- writing --------------------------------------------------------------

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_record(std::string& out, const std::string& name, const Tensor& t) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put<std::uint8_t>(out, kDtype);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
  out.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(Real));
}

// --- reading --------------------------------------------------------------

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (n > bytes_.size() - pos_) {
      throw CheckpointError(std::string("truncated checkpoint while reading ") + what + " at byte " +
                            std::to_string(pos_));
    }
  }

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const noexcept { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

void read_record(Reader& r, const std::string& expected_name, Tensor& into) {
  const auto name_len = r.get<std::uint32_t>("record name length");
  const std::string name = r.bytes(name_len, "record name");
  if (name != expected_name) {
    throw CheckpointError("expected record '" + expected_name + "' but found '" + name + "'");
  }
  const auto dtype = r.get<std::uint8_t>("record dtype");
  if (dtype != kDtype) {
    throw CheckpointError("record '" + name + "' stores " + (dtype == 0 ? "f64" : "f32") +
                          " values; this build uses " + (kDtype == 0 ? "f64" : "f32"));
  }
  const auto rank = r.get<std::uint32_t>("record rank");
  if (rank != into.rank()) {
    throw CheckpointError("shape mismatch for '" + name + "': rank " + std::to_string(rank) + " vs expected " +
                          shape_string(into.shape()));
  }
  Shape shape(rank);
  for (auto& d : shape) d = r.get<std::uint64_t>("record dims");
  if (shape != into.shape()) {
    throw CheckpointError("shape mismatch for '" + name + "': file " + shape_string(shape) + " vs config " +
                          shape_string(into.shape()));
  }
  const std::string raw = r.bytes(into.size() * sizeof(Real), "record values");
  std::memcpy(into.data(), raw.data(), raw.size());
}

// JSON has no NaN or infinity; they would come back as null.
double finite(double v, const char* field) {
  if (!std::isfinite(v)) throw CheckpointError(std::string("non-finite training progress field ") + field);
  return v;
}

json progress_to_json(const Progress& p) {
  for (double v : p.epoch_losses) finite(v, "epoch_losses");
  json j;
  j["phase"] = phase_name(p.phase);
  j["epoch"] = p.epoch;
  j["step_in_epoch"] = p.step_in_epoch;
  j["global_step"] = p.global_step;
  j["best_val"] = p.best_val ? json(finite(*p.best_val, "best_val")) : json(nullptr);
  j["bad_evals"] = p.bad_evals;
  j["stopped"] = p.stopped;
  j["epoch_loss_sum"] = finite(p.epoch_loss_sum, "epoch_loss_sum");
  j["epoch_batches"] = p.epoch_batches;
  j["window_loss_sum"] = finite(p.window_loss_sum, "window_loss_sum");
  j["window_reward_sum"] = finite(p.window_reward_sum, "window_reward_sum");
  j["window_batches"] = p.window_batches;
  j["epoch_losses"] = p.epoch_losses;
  return j;
}

Progress progress_from_json(const json& j) {
  Progress p;
  const std::string phase = j.at("phase").get<std::string>();
  if (phase == "pretrain") {
    p.phase = Phase::kPretrain;
  } else if (phase == "finetune") {
    p.phase = Phase::kFinetune;
  } else {
    throw CheckpointError("unknown training phase '" + phase + "'");
  }
  p.epoch = j.at("epoch").get<std::size_t>();
  p.step_in_epoch = j.at("step_in_epoch").get<std::size_t>();
  p.global_step = j.at("global_step").get<std::size_t>();
  if (!j.at("best_val").is_null()) p.best_val = j.at("best_val").get<double>();
  p.bad_evals = j.at("bad_evals").get<std::size_t>();
  p.stopped = j.at("stopped").get<bool>();
  p.epoch_loss_sum = j.at("epoch_loss_sum").get<double>();
  p.epoch_batches = j.at("epoch_batches").get<std::size_t>();
  p.window_loss_sum = j.at("window_loss_sum").get<double>();
  p.window_reward_sum = j.at("window_reward_sum").get<double>();
  p.window_batches = j.at("window_batches").get<std::size_t>();
  p.epoch_losses = j.at("epoch_losses").get<std::vector<double>>();
  return p;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string read_header(Reader& r) {
  const std::string magic = r.bytes(sizeof(kMagic), "magic");
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) throw CheckpointError("not an endgen checkpoint");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = r.get<std::uint64_t>("header length");
  return r.bytes(static_cast<std::size_t>(header_len), "header");
}

}  // namespace

const char* phase_name(Phase phase) { return phase == Phase::kPretrain ? "pretrain" : "finetune"; }

std::string serialize_checkpoint(const Checkpoint& c) {
  const auto& mc = c.params.config;
  json header;
  header["config"] = to_json(c.config);
  header["model"] = {{"vocab_size", mc.vocab_size},
                     {"embed_dim", mc.embed_dim},
                     {"hidden_dim", mc.hidden_dim},
                     {"dropout", mc.dropout}};
  header["dtype"] = kDtype == 0 ? "f64" : "f32";
  header["progress"] = progress_to_json(c.progress);
  header["vocab"] = {{"hash", c.vocab_hash}, {"path", c.vocab_path}};
  header["parameters"] = c.params.store.size();
  header["scalars"] = c.params.store.scalar_count();
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, header_text.size());
  out += header_text;

  const auto& store = c.params.store;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) put_record(out, store.name(i), store.value(i));

  if (c.adam.m.size() != store.size() || c.adam.v.size() != store.size()) {
    throw ContractError("optimizer moments do not match the parameter store");
  }
  put<std::uint64_t>(out, c.adam.t);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) put_record(out, store.name(i), c.adam.m[i]);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) put_record(out, store.name(i), c.adam.v[i]);
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  const std::string header_text = read_header(r);

  Checkpoint c;
  try {
    const json header = json::parse(header_text);
    c.config = train_config_from_json(header.at("config"));
    const json& m = header.at("model");
    model::ModelConfig mc{m.at("vocab_size").get<std::size_t>(), m.at("embed_dim").get<std::size_t>(),
                          m.at("hidden_dim").get<std::size_t>(), m.at("dropout").get<double>()};
    c.params = model::make_params(mc);
    c.progress = progress_from_json(header.at("progress"));
    c.vocab_hash = header.at("vocab").at("hash").get<std::uint64_t>();
    c.vocab_path = header.at("vocab").at("path").get<std::string>();
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("invalid configuration in checkpoint header: ") + e.what());
  }

  auto& store = c.params.store;
  auto read_block = [&](std::vector<Tensor>& into, const char* what) {
    const auto count = r.get<std::uint32_t>(what);
    if (count != store.size()) {
      throw CheckpointError(std::string(what) + ": file holds " + std::to_string(count) + " records, model has " +
                            std::to_string(store.size()) + " parameters");
    }
    for (std::size_t i = 0; i < store.size(); ++i) read_record(r, store.name(i), into[i]);
  };

  std::vector<Tensor> values;
  for (std::size_t i = 0; i < store.size(); ++i) values.push_back(store.value(i));
  read_block(values, "parameter count");
  for (std::size_t i = 0; i < store.size(); ++i) store.value(i) = std::move(values[i]);

  c.adam = opt::AdamState(store);
  c.adam.t = r.get<std::uint64_t>("optimizer step");
  read_block(c.adam.m, "first-moment count");
  read_block(c.adam.v, "second-moment count");
  if (!r.at_end()) throw CheckpointError("trailing bytes after checkpoint payload");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  // Write-then-rename so a crash never leaves a half-written checkpoint.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw CheckpointError("checkpoint not found: " + path.string());
  try {
    return deserialize_checkpoint(read_file(path));
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

std::string read_checkpoint_header(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  Reader r(bytes);
  return read_header(r);
}

}  // namespace endgen::train
