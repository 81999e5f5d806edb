#include "surgant/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "surgant/errors.hpp"

namespace surgant {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": not a non-negative integer: '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": not a number: '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct Field {
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define SIZE_FIELD(name)                                                                                     \
  {#name, Field{[](TrainConfig& c, const std::string& k, const std::string& v) { c.name = parse_uint(k, v); }, \
                [](const TrainConfig& c) { return std::to_string(c.name); }}}
#define DOUBLE_FIELD(name)                                                                                     \
  {#name, Field{[](TrainConfig& c, const std::string& k, const std::string& v) { c.name = parse_double(k, v); }, \
                [](const TrainConfig& c) { return fmt(c.name); }}}
#define STRING_FIELD(name)                                                                        \
  {#name, Field{[](TrainConfig& c, const std::string&, const std::string& v) { c.name = v; }, \
                [](const TrainConfig& c) { return c.name; }}}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      SIZE_FIELD(seed),
      SIZE_FIELD(epochs),
      SIZE_FIELD(batch_size),
      DOUBLE_FIELD(learning_rate),
      SIZE_FIELD(max_steps),
      SIZE_FIELD(k),
      SIZE_FIELD(feature_dim),
      SIZE_FIELD(hidden_dim),
      SIZE_FIELD(model_dim),
      SIZE_FIELD(lm_layers),
      SIZE_FIELD(lm_heads),
      SIZE_FIELD(fusion_heads),
      SIZE_FIELD(ffn_expansion),
      SIZE_FIELD(max_len),
      {"video_encoder", Field{[](TrainConfig& c, const std::string&, const std::string& v) { c.video = parse_video_encoder(v); },
                              [](const TrainConfig& c) { return video_encoder_name(c.video); }}},
      {"gate", Field{[](TrainConfig& c, const std::string&, const std::string& v) { c.gate = parse_gate_mode(v); },
                     [](const TrainConfig& c) { return gate_mode_name(c.gate); }}},
      {"use_lora", Field{[](TrainConfig& c, const std::string& k, const std::string& v) { c.use_lora = parse_bool(k, v); },
                         [](const TrainConfig& c) { return std::string(c.use_lora ? "true" : "false"); }}},
      SIZE_FIELD(lora_rank),
      DOUBLE_FIELD(lora_alpha),
      DOUBLE_FIELD(lora_dropout),
      STRING_FIELD(train_jsonl),
      STRING_FIELD(test_jsonl),
      STRING_FIELD(annotations),
      STRING_FIELD(templates),
      STRING_FIELD(checkpoint),
      STRING_FIELD(loss_csv),
      SIZE_FIELD(eval_items),
      SIZE_FIELD(max_new),
  };
  return table;
}

#undef SIZE_FIELD
#undef DOUBLE_FIELD
#undef STRING_FIELD

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](const char* name, std::size_t v) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive("epochs", epochs);
  positive("batch_size", batch_size);
  positive("k", k);
  positive("feature_dim", feature_dim);
  positive("hidden_dim", hidden_dim);
  positive("model_dim", model_dim);
  positive("lm_layers", lm_layers);
  positive("lm_heads", lm_heads);
  positive("fusion_heads", fusion_heads);
  positive("ffn_expansion", ffn_expansion);
  positive("max_len", max_len);
  positive("max_new", max_new);
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (model_dim % lm_heads != 0) throw ConfigError("model_dim must be divisible by lm_heads");
  if (model_dim % fusion_heads != 0) throw ConfigError("model_dim must be divisible by fusion_heads");
  if (use_lora) {
    positive("lora_rank", lora_rank);
    if (!(lora_alpha > 0.0)) throw ConfigError("lora_alpha must be positive");
    if (!(lora_dropout >= 0.0 && lora_dropout < 1.0)) throw ConfigError("lora_dropout must be in [0, 1)");
  }
}

ModelConfig TrainConfig::model_config(std::size_t vocab_size) const {
  ModelConfig m;
  m.vocab_size = vocab_size;
  m.feature_dim = feature_dim;
  m.hidden_dim = hidden_dim;
  m.model_dim = model_dim;
  m.lm_layers = lm_layers;
  m.lm_heads = lm_heads;
  m.fusion_heads = fusion_heads;
  m.ffn_expansion = ffn_expansion;
  m.max_len = max_len;
  m.video = video;
  m.gate = gate;
  m.use_lora = use_lora;
  m.lora.rank = lora_rank;
  m.lora.alpha = lora_alpha;
  m.lora.dropout = lora_dropout;
  return m;
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(*this, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void TrainConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

TrainConfig TrainConfig::parse(const std::string& text) {
  TrainConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    try {
      c.apply_override(t);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return c;
}

TrainConfig TrainConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string TrainConfig::serialize() const {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + "=" + field.get(*this) + "\n";
  return out;
}

void TrainConfig::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << serialize();
}

}  // namespace surgant
