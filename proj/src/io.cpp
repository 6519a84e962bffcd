#include "egt/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "egt/error.hpp"

namespace egt {

using nlohmann::json;

GroupedDistribution DistributionFile::grouped() const {
  if (!partition) throw ValidationError("distribution file has no labels");
  return decompose(density, *partition);
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string distribution_to_json(const GriddedDensity& d, const AttributePartition* partition) {
  if (partition && !(partition->grid() == d.grid())) {
    throw ValidationError("distribution file: partition grid mismatch");
  }
  std::ostringstream out;
  const GridSpec& g = d.grid();
  out << "{\n  \"grid\": {\"lo\": " << format_double(g.lo) << ", \"hi\": " << format_double(g.hi)
      << ", \"n_cells\": " << g.n_cells << "},\n";
  if (d.support_tol() > 0.0) out << "  \"support_tol\": " << format_double(d.support_tol()) << ",\n";
  out << "  \"mass\": [";
  for (std::size_t i = 0; i < d.size(); ++i) out << (i ? ", " : "") << format_double(d[i]);
  out << "]";
  if (partition) {
    out << ",\n  \"labels\": [";
    for (std::size_t i = 0; i < d.size(); ++i) out << (i ? ", " : "") << partition->label(i);
    out << "],\n  \"attribute_names\": [";
    const auto& names = partition->names();
    for (std::size_t a = 0; a < names.size(); ++a) {
      out << (a ? ", " : "") << json(names[a]).dump();
    }
    out << "]";
  }
  out << "\n}\n";
  return out.str();
}

DistributionFile distribution_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("distribution file: ") + e.what());
  }
  try {
    GridSpec grid{j.at("grid").at("lo").get<double>(), j.at("grid").at("hi").get<double>(),
                  j.at("grid").at("n_cells").get<std::size_t>()};
    const double tol = j.value("support_tol", 0.0);
    GriddedDensity density(grid, j.at("mass").get<std::vector<double>>(), tol);
    std::optional<AttributePartition> partition;
    if (j.contains("labels")) {
      partition.emplace(grid, j.at("labels").get<std::vector<std::size_t>>(),
                        j.value("attribute_names", std::vector<std::string>{}));
    }
    return {std::move(density), std::move(partition)};
  } catch (const json::exception& e) {
    throw ValidationError(std::string("distribution file: ") + e.what());
  }
}

DistributionFile read_distribution(const std::filesystem::path& path) {
  return distribution_from_json(read_text(path));
}

void write_distribution(const std::filesystem::path& path, const GriddedDensity& d,
                        const AttributePartition* partition) {
  write_text_atomic(path, distribution_to_json(d, partition));
}

void write_distribution(const std::filesystem::path& path, const GroupedDistribution& d) {
  write_distribution(path, recombine(d), &d.partition());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw ValidationError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace egt
