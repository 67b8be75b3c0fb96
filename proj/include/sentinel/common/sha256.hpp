#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace sentinel {

std::string sha256_hex(std::string_view data);

/// Incremental SHA-256 over a byte stream.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::string_view data);
  std::string hex_digest();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sentinel
