#pragma once

// Batch command-line front end. `run` is the whole program minus main(),
// so tests can drive it with in-memory streams and a stub transport.

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "cabs/llm_client.hpp"

namespace cabs_eval::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInput = 3;
inline constexpr int kExitBackend = 4;

struct Io {
  std::istream* in = nullptr;   ///< used when --input is absent or "-"
  std::ostream* out = nullptr;  ///< used when --output is absent or "-"
  std::ostream* err = nullptr;
  /// Replaces the HTTP transport of the judge client when set.
  std::shared_ptr<llm::Transport> transport;
};

int run(const std::vector<std::string>& args, const Io& io);
int run(int argc, char** argv);

}  // namespace cabs_eval::cli
