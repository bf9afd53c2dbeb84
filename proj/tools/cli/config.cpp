#include "cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "osda/errors.hpp"

namespace osda::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view why) {
  throw Error(Errc::BadValue, std::string(key) + "=" + std::string(value) + ": " + std::string(why));
}

template <class T>
T parse_int(std::string_view key, std::string_view v) {
  T out{};
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) bad(key, v, "expected an integer");
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size() || !std::isfinite(out)) bad(key, v, "expected a finite number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad(key, v, "expected true or false");
}

int int_at_least(std::string_view key, std::string_view v, int lo) {
  const int x = parse_int<int>(key, v);
  if (x < lo) bad(key, v, "must be >= " + std::to_string(lo));
  return x;
}

double positive(std::string_view key, std::string_view v) {
  const double x = parse_real(key, v);
  if (!(x > 0.0)) bad(key, v, "must be > 0");
  return x;
}

double non_negative(std::string_view key, std::string_view v) {
  const double x = parse_real(key, v);
  if (x < 0.0) bad(key, v, "must be >= 0");
  return x;
}

double unit_interval(std::string_view key, std::string_view v) {
  const double x = parse_real(key, v);
  if (x < 0.0 || x > 1.0) bad(key, v, "must lie in [0, 1]");
  return x;
}

using Setter = std::function<void(PipelineConfig&, std::string_view key, std::string_view value)>;

const std::map<std::string, Setter, std::less<>>& table() {
  static const std::map<std::string, Setter, std::less<>> t = {
      {"seed", [](auto& c, auto k, auto v) { c.seed = parse_int<std::uint64_t>(k, v); }},

      {"kmeans.max_iters", [](auto& c, auto k, auto v) { c.kmeans.max_iters = int_at_least(k, v, 1); }},
      {"kmeans.tol", [](auto& c, auto k, auto v) { c.kmeans.tol = non_negative(k, v); }},
      {"kmeans.normalize", [](auto& c, auto k, auto v) { c.kmeans.normalize = parse_bool(k, v); }},

      {"proto.scheme",
       [](auto& c, auto k, auto v) {
         const auto s = parse_weight_scheme(v);
         if (!s) bad(k, v, "expected uniform, msp, mls or csas");
         c.proto.scheme = *s;
       }},
      {"proto.tau", [](auto& c, auto k, auto v) { c.proto.tau = positive(k, v); }},
      {"proto.k", [](auto& c, auto k, auto v) { c.proto.k = int_at_least(k, v, 1); }},
      {"proto.n_mc", [](auto& c, auto k, auto v) { c.proto.n_mc = int_at_least(k, v, 1); }},

      {"distill.loss",
       [](auto& c, auto k, auto v) {
         const auto l = parse_distill_loss(v);
         if (!l) bad(k, v, "expected l2, l1 or ce");
         c.distill.loss = *l;
       }},
      {"distill.epochs", [](auto& c, auto k, auto v) { c.distill.epochs = int_at_least(k, v, 0); }},
      {"distill.lr", [](auto& c, auto k, auto v) { c.distill.learning_rate = positive(k, v); }},
      {"distill.seed", [](auto& c, auto k, auto v) { c.distill.seed = parse_int<std::uint64_t>(k, v); }},
      {"distill.batch_size", [](auto& c, auto k, auto v) { c.distill.batch_size = int_at_least(k, v, 0); }},
      {"distill.momentum",
       [](auto& c, auto k, auto v) {
         const double m = parse_real(k, v);
         if (m < 0.0 || m >= 1.0) bad(k, v, "must lie in [0, 1)");
         c.distill.momentum = m;
       }},
      {"distill.head",
       [](auto& c, auto k, auto v) {
         const auto h = parse_head_kind(v);
         if (!h) bad(k, v, "expected linear or mlp1");
         c.head = *h;
       }},
      {"distill.hidden", [](auto& c, auto k, auto v) { c.hidden = int_at_least(k, v, 1); }},

      {"synth.d", [](auto& c, auto k, auto v) { c.synth.d = int_at_least(k, v, 2); }},
      {"synth.c", [](auto& c, auto k, auto v) { c.synth.c = int_at_least(k, v, 2); }},
      {"synth.c_open", [](auto& c, auto k, auto v) { c.synth.c_open = int_at_least(k, v, 1); }},
      {"synth.n_per_class", [](auto& c, auto k, auto v) { c.synth.n_per_class = int_at_least(k, v, 1); }},
      {"synth.radius", [](auto& c, auto k, auto v) { c.synth.center_radius = positive(k, v); }},
      {"synth.spread", [](auto& c, auto k, auto v) { c.synth.spread = non_negative(k, v); }},
      {"synth.open_offset", [](auto& c, auto k, auto v) { c.synth.open_offset = parse_real(k, v); }},
      {"synth.rotation", [](auto& c, auto k, auto v) { c.synth.rotation = parse_real(k, v); }},
      {"synth.translation", [](auto& c, auto k, auto v) { c.synth.translation = parse_real(k, v); }},
      {"synth.scale", [](auto& c, auto k, auto v) { c.synth.scale = positive(k, v); }},
      {"synth.seed", [](auto& c, auto k, auto v) { c.synth.seed = parse_int<std::uint64_t>(k, v); }},

      {"advstyle.steps", [](auto& c, auto k, auto v) { c.advstyle.steps = int_at_least(k, v, 0); }},
      {"advstyle.lr_adv", [](auto& c, auto k, auto v) { c.advstyle.lr_adv = non_negative(k, v); }},
      {"advstyle.lr_student", [](auto& c, auto k, auto v) { c.advstyle.lr_student = non_negative(k, v); }},
      {"advstyle.momentum", [](auto& c, auto k, auto v) { c.advstyle.momentum = unit_interval(k, v); }},
      {"advstyle.hidden", [](auto& c, auto k, auto v) { c.advstyle.hidden = int_at_least(k, v, 1); }},
      {"advstyle.images", [](auto& c, auto k, auto v) { c.advstyle_images = int_at_least(k, v, 1); }},
  };
  return t;
}

}  // namespace

void set_key(PipelineConfig& cfg, std::string_view key, std::string_view value) {
  const auto it = table().find(key);
  if (it == table().end()) throw Error(Errc::UnknownKey, "unknown config key '" + std::string(key) + "'");
  it->second(cfg, key, trim(value));
  cfg.explicit_keys.emplace(key);
}

void apply_config_text(PipelineConfig& cfg, std::string_view text, const std::string& origin) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::BadValue, origin + ":" + std::to_string(line_no) + ": expected key=value");
    }
    const auto key = trim(line.substr(0, eq));
    try {
      set_key(cfg, key, line.substr(eq + 1));
    } catch (const Error& e) {
      std::string msg = e.what();
      msg.erase(0, to_string(e.code()).size() + 2);
      throw Error(e.code(), origin + ":" + std::to_string(line_no) + ": " + msg);
    }
  }
}

PipelineConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  PipelineConfig cfg;
  apply_config_text(cfg, ss.str(), path.string());
  return cfg;
}

std::vector<std::string> known_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : table()) keys.push_back(k);
  return keys;
}

}  // namespace osda::cli
