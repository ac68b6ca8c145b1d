#include "output.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <sstream>

namespace bvflow::cli {

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw NumericalFailure("sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

OutputSink::OutputSink(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw InvalidInput("cannot create output directory '" + dir_.string() + "': " + ec.message());
}

void OutputSink::write(const std::string& name, const std::string& content) {
  {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw InvalidInput("cannot write '" + (dir_ / name).string() + "'");
    out << content;
  }
  const std::string hash = sha256_hex(content);
  bool replaced = false;
  for (auto& entry : entries_) {
    if (entry.first == name) {
      entry.second = hash;
      replaced = true;
    }
  }
  if (!replaced) entries_.emplace_back(name, hash);
  write_manifest();
}

void OutputSink::table(const std::string& name, const csv::Table& table) {
  std::ostringstream os;
  table.write(os);
  write(name, os.str());
}

void OutputSink::report(const std::string& name, const csv::Report& report) {
  std::ostringstream os;
  csv::write_report(os, report);
  write(name, os.str());
}

void OutputSink::write_manifest() const {
  std::ofstream out(dir_ / "MANIFEST", std::ios::binary);
  for (const auto& [name, hash] : entries_) out << name << '\t' << hash << '\n';
}

}  // namespace bvflow::cli
