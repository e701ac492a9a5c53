#pragma once

// Checkpoints, key-value config files, CSV helpers and content hashes.
// Formats are documented in docs/file_formats.md.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pertl/duffing.hpp"
#include "pertl/network.hpp"
#include "pertl/training.hpp"

namespace pertl {

inline constexpr const char* kCheckpointFormat = "pertl-checkpoint/1";

struct Checkpoint {
  TrainConfig config;
  TrunkParams trunk;
  std::vector<HeadWeights> heads;
  std::vector<DuffingParams> parameter_sets;
  std::vector<double> final_head_losses;
  double final_total_loss = 0.0;
};

std::string checkpoint_to_text(const Checkpoint& ckpt);
Checkpoint checkpoint_from_text(const std::string& text);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// `key = value` lines; `#` starts a comment; blank lines ignored.
/// Throws std::invalid_argument with the line number on malformed input.
std::map<std::string, std::string> parse_key_values(const std::string& text);

/// Applies known training keys from a key-value map onto config and returns
/// the keys it did not recognize.
std::vector<std::string> apply_train_keys(const std::map<std::string, std::string>& kv, TrainConfig& config);
std::string train_config_to_text(const TrainConfig& config);

double parse_double(const std::string& key, const std::string& value);
long long parse_int(const std::string& key, const std::string& value);
std::vector<double> parse_double_list(const std::string& key, const std::string& value);
Interval parse_interval(const std::string& key, const std::string& value);

/// FNV-1a 64-bit, rendered as 16 hex digits.
std::string content_hash(const std::string& bytes);
std::string file_hash(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> comments;  // lines starting with '#', without the '#'
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);
std::string csv_to_text(const CsvTable& table);

}  // namespace pertl
