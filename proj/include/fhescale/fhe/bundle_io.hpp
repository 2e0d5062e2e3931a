#pragma once

#include <filesystem>
#include <stdexcept>

#include "fhescale/fhe/circuit.hpp"

namespace fhescale::fhe {

class BundleFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A bundle directory holds three JSON documents, each carrying
// "format_version":
//   circuit.json   weights, accumulator-scale bias, activation, range report
//   eval_key.json  evaluation key id and noise parameters (server side)
//   client.json    input quantization and output scale (client side)
inline constexpr const char* kCircuitFile = "circuit.json";
inline constexpr const char* kEvalKeyFile = "eval_key.json";
inline constexpr const char* kClientFile = "client.json";

void save_bundle(const CircuitBundle& bundle, const std::filesystem::path& dir);
CircuitBundle load_bundle(const std::filesystem::path& dir);

}  // namespace fhescale::fhe
