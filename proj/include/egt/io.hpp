#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "egt/grid.hpp"

namespace egt {

/// Contents of a distribution file:
/// {"grid": {"lo", "hi", "n_cells"}, "mass": [...], "labels": [...],
///  "attribute_names": [...], "support_tol": x}. labels, attribute_names and
/// support_tol are optional.
struct DistributionFile {
  GriddedDensity density;
  std::optional<AttributePartition> partition;

  /// Decomposes the density by its partition; ValidationError without labels.
  GroupedDistribution grouped() const;
};

/// %.17g, or "inf"/"nan" spelled out.
std::string format_double(double x);

std::string distribution_to_json(const GriddedDensity& d,
                                 const AttributePartition* partition = nullptr);
DistributionFile distribution_from_json(const std::string& text);

DistributionFile read_distribution(const std::filesystem::path& path);
void write_distribution(const std::filesystem::path& path, const GriddedDensity& d,
                        const AttributePartition* partition = nullptr);
void write_distribution(const std::filesystem::path& path, const GroupedDistribution& d);

std::string read_text(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace egt
