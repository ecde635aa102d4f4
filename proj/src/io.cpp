#include "sphmix/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace sphmix {

const char* const kGeneratorVersion = "sphmix-data-1";

std::string dataset_to_csv(const Dataset& data) {
  std::string out;
  out.reserve(data.n * data.d * 20);
  char buf[40];
  for (std::size_t i = 0; i < data.n; ++i) {
    const double* row = data.row(i);
    for (std::size_t j = 0; j < data.d; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[j]);
      if (j) out.push_back(',');
      out += buf;
    }
    out.push_back('\n');
  }
  return out;
}

Dataset dataset_from_csv(const std::string& text) {
  Dataset data;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    if (eol > pos) {
      std::size_t cols = 0;
      std::size_t p = pos;
      while (p < eol) {
        std::size_t comma = text.find(',', p);
        if (comma == std::string::npos || comma > eol) comma = eol;
        const std::string cell = text.substr(p, comma - p);
        char* end = nullptr;
        const double v = std::strtod(cell.c_str(), &end);
        if (end == cell.c_str())
          throw std::invalid_argument("dataset csv: unparsable cell '" + cell + "'");
        data.samples.push_back(v);
        ++cols;
        p = comma + 1;
      }
      if (data.d == 0) {
        data.d = cols;
      } else if (cols != data.d) {
        throw std::invalid_argument("dataset csv: ragged rows");
      }
      ++data.n;
    }
    pos = eol + 1;
  }
  if (data.n == 0) throw std::invalid_argument("dataset csv: no rows");
  return data;
}

std::string sidecar_to_json(const Dataset& data, const Mixture* truth) {
  nlohmann::json j;
  j["n"] = data.n;
  j["d"] = data.d;
  j["seed"] = data.seed;
  j["generator_version"] = kGeneratorVersion;
  if (truth != nullptr) {
    j["true_mixture"] = nlohmann::json::parse(mixture_to_json(*truth));
  }
  return j.dump(2);
}

std::optional<Mixture> apply_sidecar(const std::string& text, Dataset& data) {
  const auto j = nlohmann::json::parse(text);
  if (j.contains("n") && j["n"].get<std::size_t>() != data.n)
    throw std::invalid_argument("sidecar: sample count disagrees with csv");
  if (j.contains("d") && j["d"].get<std::size_t>() != data.d)
    throw std::invalid_argument("sidecar: dimension disagrees with csv");
  if (j.contains("seed")) data.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("true_mixture")) {
    return mixture_from_json(j["true_mixture"].dump());
  }
  return std::nullopt;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw std::runtime_error("short write: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace sphmix
