#pragma once

#include <optional>
#include <string>

#include "sphmix/model.hpp"

namespace sphmix {

// Version string recorded in dataset sidecars; bump when the sampling
// byte stream changes.
extern const char* const kGeneratorVersion;

// Headerless CSV, one row per sample, values printed with 17 significant
// digits so a write/read round trip is bit-exact.
std::string dataset_to_csv(const Dataset& data);
// Parses a headerless CSV; all rows must have the same column count.
Dataset dataset_from_csv(const std::string& text);

// Sidecar JSON: {n, d, seed, generator_version, true_mixture?}.
std::string sidecar_to_json(const Dataset& data, const Mixture* truth);
// Applies sidecar metadata (n/d consistency check, seed) to a parsed
// dataset and returns the recorded true mixture when present.
std::optional<Mixture> apply_sidecar(const std::string& text, Dataset& data);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace sphmix
