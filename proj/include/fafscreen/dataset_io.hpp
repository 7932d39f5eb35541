#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fafscreen/grid.hpp"
#include "fafscreen/svm.hpp"

namespace faf {

/// "id,label,disease,CSF_mean,CSF_std,...,IOM_std"
std::string feature_table_header();

/// One CSV row per sample, 17 significant digits per value. Requires
/// 18-dimensional features and unique ids.
std::string write_features(const Dataset& table);
/// Throws DataError on header mismatch, non-numeric cells, bad labels or
/// diseases, and duplicate ids.
Dataset read_features(std::string_view csv);

std::string format_feature_row(const LabeledSample& sample);

Dataset read_features_file(const std::filesystem::path& path);
void write_features_file(const std::filesystem::path& path, const Dataset& table);

/// Image manifest row: where an image lives, its label and grid placement.
struct ManifestEntry {
  std::string filename;
  Label label = Label::Healthy;
  Disease disease = Disease::NONE;
  GridSpec grid;
};

std::string manifest_header();
std::string write_manifest(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(std::string_view csv);

/// Unlabelled input rows for prediction and monitoring. The header must
/// start with `id`; optional `label` and `disease` columns right after it are
/// skipped; every other column is numeric. Feature tables are accepted as is.
struct InputRow {
  std::string id;
  std::vector<double> values;
};
std::vector<InputRow> read_input_rows(std::string_view csv);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace faf
