#include "ecgformer/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ecgformer/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "payload I/O assumes a little-endian host");

namespace ecgformer {

using json = nlohmann::json;

namespace {

std::string payload_path_for(const std::string& header_path) {
    const std::string suffix = ".json";
    if (header_path.size() > suffix.size() &&
        header_path.compare(header_path.size() - suffix.size(), suffix.size(),
                            suffix) == 0)
        return header_path.substr(0, header_path.size() - suffix.size()) + ".f32le";
    return header_path + ".f32le";
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

json parse_json(const std::string& text, const std::string& what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ValueError("malformed JSON in " + what);
    return j;
}

// Deterministic Fisher-Yates; <algorithm>'s shuffle is not pinned across
// standard libraries.
void shuffle_indices(std::vector<size_t>& idx, std::mt19937& rng) {
    for (size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng_index(rng, i)]);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void DatasetManifest::validate() const {
    for (const auto& e : entries) {
        if (e.path.empty()) throw ValueError("manifest entry with empty path");
        for (int l : e.labels) {
            if (l < 0) throw ValueError("negative label index in manifest");
            if (!class_names.empty() &&
                static_cast<size_t>(l) >= class_names.size())
                throw ValueError("label index " + std::to_string(l) +
                                 " out of range for " +
                                 std::to_string(class_names.size()) + " classes");
        }
    }
}

void save_recording(const Recording& rec, const std::string& header_path) {
    rec.validate();
    json hdr{{"id", rec.id},
             {"fs", rec.fs},
             {"leads", rec.leads},
             {"n_samples", rec.n_samples},
             {"labels", rec.labels},
             {"dtype", "f32le"}};
    if (!rec.source_meta.empty()) hdr["meta"] = rec.source_meta;
    write_text(header_path, hdr.dump(2) + "\n");

    std::ofstream out(payload_path_for(header_path),
                      std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + payload_path_for(header_path));
    out.write(reinterpret_cast<const char*>(rec.signal.data()),
              static_cast<std::streamsize>(rec.signal.size() * sizeof(float)));
    if (!out) throw IoError("write failed for " + payload_path_for(header_path));
}

Recording load_recording(const std::string& header_path) {
    const json hdr = parse_json(read_text(header_path), header_path);
    Recording rec;
    try {
        rec.id = hdr.at("id").get<std::string>();
        rec.fs = hdr.at("fs").get<double>();
        rec.leads = hdr.at("leads").get<size_t>();
        rec.n_samples = hdr.at("n_samples").get<size_t>();
        rec.labels = hdr.at("labels").get<std::vector<int>>();
        if (hdr.at("dtype").get<std::string>() != "f32le")
            throw ValueError("unsupported dtype in " + header_path);
        if (hdr.contains("meta"))
            rec.source_meta =
                hdr.at("meta").get<std::map<std::string, std::string>>();
    } catch (const json::exception& e) {
        throw ValueError("bad recording header " + header_path + ": " + e.what());
    }

    const std::string payload = payload_path_for(header_path);
    const std::string raw = read_text(payload);
    const size_t expect = rec.leads * rec.n_samples * sizeof(float);
    if (raw.size() != expect)
        throw ValueError("payload " + payload + " holds " +
                         std::to_string(raw.size() / sizeof(float)) +
                         " samples, header declares " +
                         std::to_string(rec.leads * rec.n_samples));
    rec.signal.resize(rec.leads * rec.n_samples);
    std::memcpy(rec.signal.data(), raw.data(), expect);
    rec.validate();
    return rec;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    m.validate();
    std::string text;
    for (const auto& e : m.entries) {
        json line{{"path", e.path}, {"labels", e.labels}, {"fold", e.fold}};
        text += line.dump() + "\n";
    }
    write_text(path, text);
}

DatasetManifest load_manifest(const std::string& path) {
    DatasetManifest m;
    std::istringstream in(read_text(path));
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const json j = parse_json(line, path + ":" + std::to_string(lineno));
        ManifestEntry e;
        try {
            e.path = j.at("path").get<std::string>();
            e.labels = j.at("labels").get<std::vector<int>>();
            if (j.contains("fold")) e.fold = j.at("fold").get<int>();
        } catch (const json::exception& ex) {
            throw ValueError("bad manifest line " + std::to_string(lineno) +
                             " in " + path + ": " + ex.what());
        }
        m.entries.push_back(std::move(e));
    }
    m.validate();
    return m;
}

void save_class_list(const std::vector<std::string>& names,
                     const std::string& path) {
    std::string text;
    for (const auto& n : names) {
        if (n.empty() || n.find(',') != std::string::npos ||
            n.find('\n') != std::string::npos)
            throw ValueError("class name '" + n + "' must be nonempty, no commas");
        text += n + "\n";
    }
    write_text(path, text);
}

std::vector<std::string> load_class_list(const std::string& path) {
    std::vector<std::string> names;
    std::istringstream in(read_text(path));
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
            line.pop_back();
        if (!line.empty()) names.push_back(line);
    }
    if (names.empty()) throw ValueError("class list " + path + " is empty");
    return names;
}

DatasetManifest split_folds(DatasetManifest m, int n_folds, uint64_t seed) {
    if (n_folds < 2) throw ConfigError("split_folds needs n_folds >= 2");
    if (m.entries.size() < static_cast<size_t>(n_folds))
        throw ValueError("fewer recordings (" + std::to_string(m.entries.size()) +
                         ") than folds (" + std::to_string(n_folds) + ")");

    // Group by exact label signature; map keeps group order deterministic.
    std::map<std::string, std::vector<size_t>> groups;
    for (size_t i = 0; i < m.entries.size(); ++i) {
        std::vector<int> labels = m.entries[i].labels;
        std::sort(labels.begin(), labels.end());
        std::string sig;
        for (int l : labels) sig += std::to_string(l) + ",";
        groups[sig].push_back(i);
    }

    size_t next = 0;
    size_t group_index = 0;
    for (auto& [sig, idx] : groups) {
        std::mt19937 rng = derive_rng(seed, "fold", group_index++);
        shuffle_indices(idx, rng);
        for (size_t i : idx)
            m.entries[i].fold = static_cast<int>(next++ % n_folds);
    }
    return m;
}

WeightMatrix WeightMatrix::identity(const std::vector<std::string>& classes) {
    WeightMatrix wm;
    wm.classes = classes;
    const size_t n = classes.size();
    wm.w.assign(n * n, 0.0);
    for (size_t i = 0; i < n; ++i) wm.w[i * n + i] = 1.0;
    return wm;
}

void save_weight_matrix(const WeightMatrix& wm, const std::string& path) {
    const size_t n = wm.n();
    if (wm.w.size() != n * n)
        throw ValueError("weight matrix must be square");
    std::string text;
    for (const auto& c : wm.classes) text += "," + c;
    text += "\n";
    for (size_t i = 0; i < n; ++i) {
        text += wm.classes[i];
        for (size_t j = 0; j < n; ++j) text += "," + fmt_double(wm.at(i, j));
        text += "\n";
    }
    write_text(path, text);
}

WeightMatrix load_weight_matrix(const std::string& path) {
    std::istringstream in(read_text(path));
    std::string line;
    if (!std::getline(in, line)) throw ValueError("empty weight matrix " + path);
    auto header = split_csv_line(line);
    if (header.size() < 2 || !header[0].empty())
        throw ValueError("weight matrix " + path +
                         " must start with an empty corner cell");
    WeightMatrix wm;
    wm.classes.assign(header.begin() + 1, header.end());
    const size_t n = wm.n();
    wm.w.assign(n * n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line))
            throw ValueError("weight matrix " + path + " truncated at row " +
                             std::to_string(i));
        auto cells = split_csv_line(line);
        if (cells.size() != n + 1 || cells[0] != wm.classes[i])
            throw ValueError("weight matrix " + path + " row " +
                             std::to_string(i) + " does not match header order");
        for (size_t j = 0; j < n; ++j) {
            try {
                wm.w[i * n + j] = std::stod(cells[j + 1]);
            } catch (const std::exception&) {
                throw ValueError("weight matrix " + path + " has a non-numeric cell");
            }
        }
    }
    for (double v : wm.w)
        if (!std::isfinite(v))
            throw ValueError("weight matrix " + path + " has non-finite entries");
    return wm;
}

void save_predictions(const Predictions& p, const std::string& path) {
    const size_t n = p.class_names.size();
    if (p.scores.size() != p.ids.size() * n)
        throw ValueError("predictions scores size does not match ids x classes");
    std::string text = "id";
    for (size_t c = 0; c < n; ++c) text += ",score_class_" + std::to_string(c);
    text += "\n";
    for (size_t r = 0; r < p.ids.size(); ++r) {
        text += p.ids[r];
        for (size_t c = 0; c < n; ++c) text += "," + fmt_double(p.at(r, c));
        text += "\n";
    }
    write_text(path, text);
}

std::map<std::string, std::vector<float>> load_wide_features(
    const std::string& path) {
    const json j = parse_json(read_text(path), path);
    if (!j.is_object())
        throw ValueError("wide features " + path + " must be a JSON object");
    std::map<std::string, std::vector<float>> out;
    size_t dim = 0;
    for (const auto& [id, arr] : j.items()) {
        std::vector<float> v;
        try {
            v = arr.get<std::vector<float>>();
        } catch (const json::exception&) {
            throw ValueError("wide features for '" + id + "' must be a number array");
        }
        if (dim == 0) dim = v.size();
        if (v.empty() || v.size() != dim)
            throw ValueError("wide feature vectors must be nonempty and equal-length");
        out.emplace(id, std::move(v));
    }
    return out;
}

std::string resolve_path(const std::string& root, const std::string& path) {
    if (root.empty() || (!path.empty() && path.front() == '/')) return path;
    return root.back() == '/' ? root + path : root + "/" + path;
}

Predictions load_predictions(const std::string& path) {
    std::istringstream in(read_text(path));
    std::string line;
    if (!std::getline(in, line)) throw ValueError("empty predictions file " + path);
    auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "id")
        throw ValueError("predictions " + path + " must start with an id column");
    Predictions p;
    p.class_names.assign(header.begin() + 1, header.end());
    const size_t n = p.class_names.size();
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        if (cells.size() != n + 1)
            throw ValueError("predictions " + path + " row for '" +
                             (cells.empty() ? "" : cells[0]) +
                             "' has wrong column count");
        p.ids.push_back(cells[0]);
        for (size_t c = 0; c < n; ++c) {
            try {
                p.scores.push_back(std::stod(cells[c + 1]));
            } catch (const std::exception&) {
                throw ValueError("predictions " + path + " has a non-numeric score");
            }
        }
    }
    return p;
}

}  // namespace ecgformer
