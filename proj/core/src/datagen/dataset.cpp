#include "sig/datagen/dataset.hpp"

#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace sig::datagen {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& tok, const std::string& file, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
    throw ParseError(file + ":" + std::to_string(line) + ": bad float '" + tok + "'");
  }
  return v;
}

std::size_t parse_index(const std::string& tok, const std::string& file,
                        std::size_t line) {
  std::size_t v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
    throw ParseError(file + ":" + std::to_string(line) + ": bad index '" + tok + "'");
  }
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ParseError("unknown split tag '" + s + "'");
}

std::vector<std::size_t> SyntheticDataset::rows_of(std::size_t domain, Split s) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < size(); ++i)
    if (u[i] == domain && split[i] == s) idx.push_back(i);
  return idx;
}

std::vector<std::size_t> SyntheticDataset::rows_of_split(Split s) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < size(); ++i)
    if (split[i] == s) idx.push_back(i);
  return idx;
}

void SyntheticDataset::validate() const {
  const std::size_t n = size();
  if (y.size() != n || u.size() != n || split.size() != n) {
    throw numkit::ShapeError("SyntheticDataset: sequence lengths disagree");
  }
  if (has_latents && (Z_true.rows != n || Z_true.cols != X.cols)) {
    throw numkit::ShapeError("SyntheticDataset: Z_true shape mismatch");
  }
  if (dims[0] + dims[1] + dims[2] + dims[3] != X.cols) {
    throw numkit::ShapeError("SyntheticDataset: dims do not sum to feature dim");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] >= num_classes) throw numkit::ShapeError("SyntheticDataset: label out of range");
    if (u[i] >= num_domains) throw numkit::ShapeError("SyntheticDataset: domain out of range");
  }
  std::vector<std::array<std::size_t, 3>> cell(num_domains, {0, 0, 0});
  for (std::size_t i = 0; i < n; ++i) cell[u[i]][static_cast<int>(split[i])]++;
  for (std::size_t d = 0; d < num_domains; ++d)
    for (int s = 0; s < 3; ++s)
      if (cell[d][s] == 0) {
        throw numkit::ShapeError("SyntheticDataset: empty (domain " + std::to_string(d) +
                                 ", " + split_name(static_cast<Split>(s)) + ") cell");
      }
}

void save_dataset(const SyntheticDataset& ds, const std::string& prefix) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(prefix).parent_path();
  if (!dir.empty()) fs::create_directories(dir);

  {
    std::ofstream f(prefix + ".csv", std::ios::binary);
    if (!f) throw ParseError("cannot open " + prefix + ".csv for writing");
    for (std::size_t j = 0; j < ds.X.cols; ++j) f << "x" << j << ",";
    f << "y,u,split\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
      for (std::size_t j = 0; j < ds.X.cols; ++j) f << fmt_double(ds.X(i, j)) << ",";
      f << ds.y[i] << "," << ds.u[i] << "," << split_name(ds.split[i]) << "\n";
    }
  }

  if (ds.has_latents) {
    std::ofstream f(prefix + ".latents.csv", std::ios::binary);
    if (!f) throw ParseError("cannot open " + prefix + ".latents.csv for writing");
    for (std::size_t j = 0; j < ds.Z_true.cols; ++j)
      f << "z" << j << (j + 1 < ds.Z_true.cols ? "," : "");
    f << "\n";
    for (std::size_t i = 0; i < ds.Z_true.rows; ++i) {
      for (std::size_t j = 0; j < ds.Z_true.cols; ++j)
        f << fmt_double(ds.Z_true(i, j)) << (j + 1 < ds.Z_true.cols ? "," : "");
      f << "\n";
    }
  }

  {
    nlohmann::json meta;
    meta["n1"] = ds.dims[0];
    meta["n2"] = ds.dims[1];
    meta["n3"] = ds.dims[2];
    meta["n4"] = ds.dims[3];
    meta["num_domains"] = ds.num_domains;
    meta["num_classes"] = ds.num_classes;
    meta["master_seed"] = ds.master_seed;
    meta["process"] = ds.process;
    meta["generator_version"] = ds.generator_version;
    meta["rows"] = ds.size();
    std::ofstream f(prefix + ".meta.json", std::ios::binary);
    if (!f) throw ParseError("cannot open " + prefix + ".meta.json for writing");
    f << meta.dump(2) << "\n";
  }
}

SyntheticDataset load_dataset(const std::string& prefix) {
  namespace fs = std::filesystem;
  SyntheticDataset ds;

  const std::string meta_path = prefix + ".meta.json";
  {
    std::ifstream f(meta_path, std::ios::binary);
    if (!f) throw ParseError("cannot open " + meta_path);
    nlohmann::json meta;
    try {
      f >> meta;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(meta_path + ": " + e.what());
    }
    ds.dims = {meta.at("n1").get<std::size_t>(), meta.at("n2").get<std::size_t>(),
               meta.at("n3").get<std::size_t>(), meta.at("n4").get<std::size_t>()};
    ds.num_domains = meta.at("num_domains").get<std::size_t>();
    ds.num_classes = meta.at("num_classes").get<std::size_t>();
    ds.master_seed = meta.at("master_seed").get<std::uint64_t>();
    ds.process = meta.value("process", "simple");
    ds.generator_version = meta.value("generator_version", "1");
  }
  const std::size_t n_features = ds.dims[0] + ds.dims[1] + ds.dims[2] + ds.dims[3];

  const std::string csv_path = prefix + ".csv";
  {
    std::ifstream f(csv_path, std::ios::binary);
    if (!f) throw ParseError("cannot open " + csv_path);
    std::string line;
    if (!std::getline(f, line)) throw ParseError(csv_path + ":1: empty file");
    const auto header = split_csv_line(line);
    if (header.size() != n_features + 3) {
      throw ParseError(csv_path + ":1: header has " + std::to_string(header.size()) +
                       " columns, metadata implies " + std::to_string(n_features + 3));
    }
    std::vector<double> xs;
    std::size_t line_no = 1;
    while (std::getline(f, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto tok = split_csv_line(line);
      if (tok.size() != n_features + 3) {
        throw ParseError(csv_path + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(n_features + 3) + " fields, got " +
                         std::to_string(tok.size()));
      }
      for (std::size_t j = 0; j < n_features; ++j)
        xs.push_back(parse_double(tok[j], csv_path, line_no));
      ds.y.push_back(parse_index(tok[n_features], csv_path, line_no));
      ds.u.push_back(parse_index(tok[n_features + 1], csv_path, line_no));
      try {
        ds.split.push_back(split_from_name(tok[n_features + 2]));
      } catch (const ParseError& e) {
        throw ParseError(csv_path + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    const std::size_t rows = ds.y.size();
    ds.X = numkit::Matrix(rows, n_features, std::move(xs));
  }

  const std::string lat_path = prefix + ".latents.csv";
  if (fs::exists(lat_path)) {
    std::ifstream f(lat_path, std::ios::binary);
    if (!f) throw ParseError("cannot open " + lat_path);
    std::string line;
    if (!std::getline(f, line)) throw ParseError(lat_path + ":1: empty file");
    const auto header = split_csv_line(line);
    if (header.size() != n_features) {
      throw ParseError(lat_path + ":1: header has " + std::to_string(header.size()) +
                       " columns, metadata implies " + std::to_string(n_features));
    }
    std::vector<double> zs;
    std::size_t line_no = 1;
    while (std::getline(f, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto tok = split_csv_line(line);
      if (tok.size() != n_features) {
        throw ParseError(lat_path + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(n_features) + " fields, got " +
                         std::to_string(tok.size()));
      }
      for (const auto& t : tok) zs.push_back(parse_double(t, lat_path, line_no));
    }
    const std::size_t rows = zs.size() / n_features;
    if (rows != ds.size()) {
      throw ParseError(lat_path + ": " + std::to_string(rows) + " latent rows vs " +
                       std::to_string(ds.size()) + " data rows");
    }
    ds.Z_true = numkit::Matrix(rows, n_features, std::move(zs));
    ds.has_latents = true;
  } else {
    ds.has_latents = false;
  }

  ds.validate();
  return ds;
}

}  // namespace sig::datagen
