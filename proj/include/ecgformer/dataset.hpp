#pragma once

// On-disk formats and dataset bookkeeping. A recording is a JSON header
// (<id>.json) next to a raw float32 little-endian payload (<id>.f32le),
// lead-major. Manifests are JSON-lines of {path, labels, fold}; the class
// list is plain text, one name per line; the metric weight matrix is CSV
// with class names in the first row and column.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ecgformer/signal.hpp"

namespace ecgformer {

struct ManifestEntry {
    std::string path;
    std::vector<int> labels;
    int fold = -1;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::vector<std::string> class_names;

    void validate() const;
};

// header_path names the .json file; the payload path is derived by
// replacing its extension with .f32le.
void save_recording(const Recording& rec, const std::string& header_path);
Recording load_recording(const std::string& header_path);

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

void save_class_list(const std::vector<std::string>& names, const std::string& path);
std::vector<std::string> load_class_list(const std::string& path);

// Stratified fold assignment: entries are grouped by exact label signature,
// each group shuffled by a seed-derived stream, then dealt round-robin.
DatasetManifest split_folds(DatasetManifest m, int n_folds, uint64_t seed);

struct WeightMatrix {
    std::vector<std::string> classes;
    std::vector<double> w;  // row-major [N x N]

    size_t n() const { return classes.size(); }
    double at(size_t i, size_t j) const { return w[i * n() + j]; }
    static WeightMatrix identity(const std::vector<std::string>& classes);
};

void save_weight_matrix(const WeightMatrix& wm, const std::string& path);
WeightMatrix load_weight_matrix(const std::string& path);

// Predictions CSV: header "id,score_<class_0>,..."; one row per recording.
struct Predictions {
    std::vector<std::string> ids;
    std::vector<std::string> class_names;
    std::vector<double> scores;  // row-major [ids x classes]

    double at(size_t r, size_t c) const { return scores[r * class_names.size() + c]; }
};

void save_predictions(const Predictions& p, const std::string& path);
Predictions load_predictions(const std::string& path);

// Auxiliary per-recording feature vectors: JSON object {id: [floats]}.
// The feature definitions are user-supplied; this is only the transport.
std::map<std::string, std::vector<float>> load_wide_features(
    const std::string& path);

// Joins a manifest-relative path onto the dataset root.
std::string resolve_path(const std::string& root, const std::string& path);

}  // namespace ecgformer
