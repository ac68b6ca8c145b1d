#pragma once

#include "bvflow/csv.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace bvflow::cli {

std::string sha256_hex(const std::string& data);

/// Writes artifacts into one directory and keeps the MANIFEST
/// (`path<TAB>sha256` per file, in write order) up to date, so that a run
/// that fails halfway still leaves a consistent listing.
class OutputSink {
 public:
  explicit OutputSink(std::filesystem::path dir);

  void write(const std::string& name, const std::string& content);
  void table(const std::string& name, const csv::Table& table);
  void report(const std::string& name, const csv::Report& report);

  [[nodiscard]] const std::filesystem::path& dir() const { return dir_; }
  [[nodiscard]] const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  void write_manifest() const;

  std::filesystem::path dir_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace bvflow::cli
