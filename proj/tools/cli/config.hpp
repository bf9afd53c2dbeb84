#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "osda/cluster.hpp"
#include "osda/distiller.hpp"
#include "osda/protolab.hpp"
#include "osda/selfdistill.hpp"
#include "osda/synthbench.hpp"

namespace osda::cli {

struct PipelineConfig {
  std::uint64_t seed = 0;
  KMeansConfig kmeans;
  ProtoConfig proto;
  TrainConfig distill;
  HeadKind head = HeadKind::Linear;
  int hidden = 64;
  SynthConfig synth;
  AdvStyleConfig advstyle;
  int advstyle_images = 4;
  /// Keys assigned by a config file or flag, as opposed to defaults.
  std::set<std::string, std::less<>> explicit_keys;

  bool is_set(std::string_view key) const { return explicit_keys.find(key) != explicit_keys.end(); }
};

/// Sets one dotted key. UnknownKey for keys outside the table, BadValue when
/// the value does not parse or violates the key's range.
void set_key(PipelineConfig& cfg, std::string_view key, std::string_view value);

/// key=value lines; '#' starts a comment, blank lines are ignored.
void apply_config_text(PipelineConfig& cfg, std::string_view text, const std::string& origin = "<text>");
PipelineConfig parse_config(const std::filesystem::path& path);

/// Every key set_key accepts, sorted.
std::vector<std::string> known_keys();

}  // namespace osda::cli
