// SPDX-License-Identifier: Apache-2.0
#include "loadcast/model.hpp"

#include "loadcast/error.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace loadcast::model {

namespace {

constexpr std::string_view kMagic = "loadcast-model";
constexpr int kFormatVersion = 1;

std::string hex(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                 std::chars_format::hex);
  return std::string(buf.data(), end);
}

double parse_hex(const std::string &token) {
  double v = 0.0;
  const char *first = token.data();
  const char *last = token.data() + token.size();
  auto [end, ec] = std::from_chars(first, last, v, std::chars_format::hex);
  if (ec != std::errc{} || end != last)
    throw DataError("malformed number '" + token + "' in model file");
  return v;
}

void write_values(std::ostream &out, const Vector &v) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out << (i ? " " : "") << hex(v(i));
  out << '\n';
}

class Reader {
public:
  explicit Reader(std::istream &in) : in_(in) {}

  std::istringstream line(std::string_view expected_key) {
    std::string text;
    if (!std::getline(in_, text))
      throw DataError("model file truncated, expected '" +
                      std::string(expected_key) + "'");
    std::istringstream ss(text);
    std::string key;
    ss >> key;
    if (key != expected_key)
      throw DataError("model file: expected '" + std::string(expected_key) +
                      "', found '" + key + "'");
    return ss;
  }

  std::size_t count(std::istringstream &ss, std::string_view what) {
    long long v = -1;
    if (!(ss >> v) || v < 0)
      throw DataError("model file: bad " + std::string(what));
    return static_cast<std::size_t>(v);
  }

  Vector values(std::size_t n) {
    std::string text;
    if (!std::getline(in_, text))
      throw DataError("model file truncated inside a block");
    std::istringstream ss(text);
    Vector v(static_cast<Eigen::Index>(n));
    std::string token;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(ss >> token))
        throw DataError("model file: block row too short");
      v(static_cast<Eigen::Index>(i)) = parse_hex(token);
    }
    if (ss >> token)
      throw DataError("model file: block row too long");
    return v;
  }

private:
  std::istream &in_;
};

} // namespace

void save_model(std::ostream &out, const Network &net) {
  net.validate();
  for (const auto &name : net.feature_names)
    if (name.empty() || name.find_first_of(" \t\r\n") != std::string::npos)
      throw ConfigError("feature names in a model file may not contain blanks");

  out << kMagic << " " << kFormatVersion << '\n';
  out << "cell " << to_string(net.cell) << '\n';
  out << "features " << net.feature_count() << '\n';
  out << "lookback " << net.lookback << '\n';
  out << "target " << net.target_feature << '\n';
  out << "layers " << net.layer_count() << '\n';
  out << "hidden";
  for (auto w : net.hidden_widths())
    out << ' ' << w;
  out << '\n';
  out << "names " << net.feature_names.size();
  for (const auto &name : net.feature_names)
    out << ' ' << name;
  out << '\n';
  out << "scaler " << (net.scaler ? 1 : 0) << '\n';
  if (net.scaler) {
    write_values(out, net.scaler->minimum);
    write_values(out, net.scaler->maximum);
  }
  net.params.for_each_block([&out](const std::string &name, const auto &block) {
    using Block = std::decay_t<decltype(block)>;
    if constexpr (std::is_same_v<Block, Matrix>) {
      out << "block " << name << ' ' << block.rows() << ' ' << block.cols()
          << '\n';
      for (Eigen::Index r = 0; r < block.rows(); ++r)
        write_values(out, block.row(r).transpose());
    } else {
      out << "block " << name << ' ' << block.size() << " 1\n";
      write_values(out, block);
    }
  });
  out << "end\n";
  if (!out)
    throw IoError("failed writing model");
}

Network load_model(std::istream &in) {
  if (!in)
    throw IoError("model stream is not readable");
  Reader reader(in);
  {
    auto ss = reader.line(kMagic);
    int version = 0;
    if (!(ss >> version) || version != kFormatVersion)
      throw DataError("unsupported model format version");
  }
  Network net;
  {
    auto ss = reader.line("cell");
    std::string kind;
    ss >> kind;
    net.cell = parse_cell_kind(kind);
  }
  std::size_t features = 0;
  {
    auto ss = reader.line("features");
    features = reader.count(ss, "feature count");
  }
  {
    auto ss = reader.line("lookback");
    net.lookback = reader.count(ss, "lookback");
  }
  {
    auto ss = reader.line("target");
    net.target_feature = reader.count(ss, "target feature");
  }
  std::size_t layers = 0;
  {
    auto ss = reader.line("layers");
    layers = reader.count(ss, "layer count");
  }
  std::vector<std::size_t> hidden;
  {
    auto ss = reader.line("hidden");
    for (std::size_t l = 0; l < layers; ++l)
      hidden.push_back(reader.count(ss, "hidden width"));
  }
  {
    auto ss = reader.line("names");
    const std::size_t n = reader.count(ss, "name count");
    for (std::size_t i = 0; i < n; ++i) {
      std::string name;
      if (!(ss >> name))
        throw DataError("model file: missing feature name");
      net.feature_names.push_back(name);
    }
  }
  {
    auto ss = reader.line("scaler");
    if (reader.count(ss, "scaler flag") == 1) {
      data::ScalerParams sp;
      sp.minimum = reader.values(features);
      sp.maximum = reader.values(features);
      for (std::size_t f = 0; f < features; ++f) {
        const auto i = static_cast<Eigen::Index>(f);
        if (sp.maximum(i) < sp.minimum(i))
          throw DataError("model file: scaler maximum below minimum");
        sp.degenerate_mask.push_back(sp.maximum(i) == sp.minimum(i));
      }
      net.scaler = std::move(sp);
    }
  }
  if (features < 1 || layers < 1)
    throw DataError("model file: empty network");
  std::size_t width = features;
  for (std::size_t l = 0; l < layers; ++l) {
    if (hidden[l] < 1)
      throw DataError("model file: zero hidden width");
    net.params.layers.push_back(LayerParams::zeros(net.cell, width, hidden[l]));
    width = hidden[l];
  }
  net.params.head_weights = Matrix::Zero(static_cast<Eigen::Index>(features),
                                         static_cast<Eigen::Index>(width));
  net.params.head_bias = Vector::Zero(static_cast<Eigen::Index>(features));

  net.params.for_each_block([&reader](const std::string &name, auto &block) {
    auto ss = reader.line("block");
    std::string found;
    ss >> found;
    if (found != name)
      throw DataError("model file: expected block '" + name + "', found '" +
                      found + "'");
    const std::size_t rows = reader.count(ss, "block rows");
    const std::size_t cols = reader.count(ss, "block cols");
    using Block = std::decay_t<decltype(block)>;
    if constexpr (std::is_same_v<Block, Matrix>) {
      if (rows != static_cast<std::size_t>(block.rows()) ||
          cols != static_cast<std::size_t>(block.cols()))
        throw DataError("model file: block '" + name + "' has wrong shape");
      for (std::size_t r = 0; r < rows; ++r)
        block.row(static_cast<Eigen::Index>(r)) = reader.values(cols).transpose();
    } else {
      if (rows != static_cast<std::size_t>(block.size()) || cols != 1)
        throw DataError("model file: block '" + name + "' has wrong shape");
      block = reader.values(rows);
    }
  });
  reader.line("end");
  try {
    net.validate();
  } catch (const ShapeError &e) {
    throw DataError(std::string("model file is inconsistent: ") + e.what());
  }
  return net;
}

void save_model_file(const std::string &path, const Network &net) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("cannot open '" + tmp + "' for writing");
    try {
      save_model(out, net);
    } catch (...) {
      out.close();
      std::remove(tmp.c_str());
      throw;
    }
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw IoError("failed writing '" + tmp + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw IoError("cannot move model into place at '" + path +
                  "': " + ec.message());
  }
}

Network load_model_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open model file '" + path + "'");
  return load_model(in);
}

} // namespace loadcast::model
