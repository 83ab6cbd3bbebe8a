// Copyright 2026 The eelab Authors
// SPDX-License-Identifier: Apache-2.0

#include "eelab/weights_io.hpp"

#include <bit>
#include <cstring>
#include <limits>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace eelab::model {

using nlohmann::json;

namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(u & 0xFFu));
    u = static_cast<U>(u >> 8);
  }
}

template <typename T>
T get_le(std::string_view bytes, std::size_t offset) {
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return static_cast<T>(u);
}

struct TensorRef {
  std::string name;
  std::size_t rows;
  std::size_t cols;  // 1-D tensors are stored with cols == 0 in the shape list
  bool vector;
};

std::vector<TensorRef> expected_tensors(const ModelConfig& c) {
  const auto d = static_cast<std::size_t>(c.d_model);
  const auto v = static_cast<std::size_t>(c.vocab_size);
  const auto ff = static_cast<std::size_t>(c.d_ff);
  std::vector<TensorRef> out;
  out.push_back({"token_embedding", v, d, false});
  out.push_back({"position_embedding", static_cast<std::size_t>(c.max_seq), d, false});
  for (int i = 0; i < c.n_layers; ++i) {
    const std::string p = "layers." + std::to_string(i) + ".";
    out.push_back({p + "attn_norm", d, 0, true});
    out.push_back({p + "wq", d, d, false});
    out.push_back({p + "wk", d, d, false});
    out.push_back({p + "wv", d, d, false});
    out.push_back({p + "wo", d, d, false});
    out.push_back({p + "ffn_norm", d, 0, true});
    out.push_back({p + "w_up", d, ff, false});
    out.push_back({p + "w_down", ff, d, false});
  }
  out.push_back({"final_norm", d, 0, true});
  out.push_back({"unembedding", d, v, false});
  return out;
}

void append_floats(std::string& out, std::span<const float> values) {
  for (float f : values) put_le(out, std::bit_cast<std::uint32_t>(f));
}

json config_to_json(const ModelConfig& c) {
  return json{{"n_layers", c.n_layers}, {"d_model", c.d_model},       {"n_heads", c.n_heads},
              {"d_ff", c.d_ff},         {"vocab_size", c.vocab_size}, {"max_seq", c.max_seq},
              {"end_token", c.end_token}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  try {
    c.n_layers = j.at("n_layers").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.max_seq = j.at("max_seq").get<int>();
    c.end_token = j.value("end_token", kNoToken);
  } catch (const json::exception& e) {
    throw ModelError(ModelErrc::MalformedHeader, std::string("bad config block: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace

std::string serialize_model(const LayerStack& model) {
  const auto& cfg = model.config();
  const auto refs = expected_tensors(cfg);
  json tensors = json::array();
  for (const auto& r : refs) {
    json shape = r.vector ? json::array({r.rows}) : json::array({r.rows, r.cols});
    tensors.push_back(json{{"name", r.name}, {"shape", shape}});
  }
  const std::string header = json{{"config", config_to_json(cfg)}, {"tensors", tensors}}.dump();

  std::string out(kWeightMagic, sizeof(kWeightMagic));
  put_le<std::uint32_t>(out, kWeightFormatVersion);
  put_le<std::uint64_t>(out, header.size());
  out += header;
  append_floats(out, model.token_embedding().data());
  append_floats(out, model.position_embedding().data());
  for (const auto& l : model.layers()) {
    append_floats(out, l.attn_norm);
    append_floats(out, l.wq.data());
    append_floats(out, l.wk.data());
    append_floats(out, l.wv.data());
    append_floats(out, l.wo.data());
    append_floats(out, l.ffn_norm);
    append_floats(out, l.w_up.data());
    append_floats(out, l.w_down.data());
  }
  append_floats(out, model.final_norm());
  append_floats(out, model.unembedding().data());
  return out;
}

LayerStack parse_model(std::string_view bytes) {
  constexpr std::size_t kPrelude = 4 + 4 + 8;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kWeightMagic, 4) != 0) {
    throw ModelError(ModelErrc::BadMagic, "missing ADEE magic bytes");
  }
  if (bytes.size() < kPrelude) throw ModelError(ModelErrc::MalformedHeader, "truncated prelude");
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kWeightFormatVersion) {
    throw ModelError(ModelErrc::UnsupportedVersion, "format version " + std::to_string(version));
  }
  const auto header_len = get_le<std::uint64_t>(bytes, 8);
  if (header_len > bytes.size() - kPrelude) throw ModelError(ModelErrc::MalformedHeader, "truncated header");

  json header;
  try {
    header = json::parse(bytes.substr(kPrelude, static_cast<std::size_t>(header_len)));
  } catch (const json::exception& e) {
    throw ModelError(ModelErrc::MalformedHeader, std::string("header is not valid JSON: ") + e.what());
  }
  if (!header.is_object() || !header.contains("config") || !header.contains("tensors") ||
      !header["tensors"].is_array()) {
    throw ModelError(ModelErrc::MalformedHeader, "header needs 'config' and 'tensors'");
  }
  const ModelConfig cfg = config_from_json(header["config"]);

  // name -> (shape, offset in floats)
  struct Entry {
    std::vector<std::size_t> shape;
    std::size_t offset;
    std::size_t count;
  };
  std::map<std::string, Entry> listed;
  std::size_t total = 0;
  for (const auto& t : header["tensors"]) {
    Entry e;
    std::string name;
    try {
      name = t.at("name").get<std::string>();
      e.shape = t.at("shape").get<std::vector<std::size_t>>();
    } catch (const json::exception& ex) {
      throw ModelError(ModelErrc::MalformedHeader, std::string("bad tensor entry: ") + ex.what());
    }
    if (e.shape.empty() || e.shape.size() > 2) {
      throw ModelError(ModelErrc::MalformedHeader, "tensor " + name + " must be 1-D or 2-D");
    }
    e.count = e.shape.size() == 1 ? e.shape[0] : e.shape[0] * e.shape[1];
    e.offset = total;
    total += e.count;
    if (!listed.emplace(name, std::move(e)).second) {
      throw ModelError(ModelErrc::MalformedHeader, "duplicate tensor " + name);
    }
  }

  const std::size_t payload_at = kPrelude + static_cast<std::size_t>(header_len);
  const std::size_t payload_bytes = bytes.size() - payload_at;
  if (payload_bytes != total * 4) {
    throw ModelError(ModelErrc::DimensionMismatch, "payload holds " + std::to_string(payload_bytes) +
                                                       " bytes but the header lists " + std::to_string(total * 4));
  }

  const auto refs = expected_tensors(cfg);
  for (const auto& r : refs) {
    auto it = listed.find(r.name);
    if (it == listed.end()) {
      throw ModelError(ModelErrc::DimensionMismatch, "tensor " + r.name + " missing for config with " +
                                                         std::to_string(cfg.n_layers) + " layers");
    }
    const std::vector<std::size_t> want =
        r.vector ? std::vector<std::size_t>{r.rows} : std::vector<std::size_t>{r.rows, r.cols};
    if (it->second.shape != want) throw ModelError(ModelErrc::DimensionMismatch, "tensor " + r.name + " has wrong shape");
  }
  if (listed.size() != refs.size()) {
    throw ModelError(ModelErrc::DimensionMismatch, "header lists " + std::to_string(listed.size()) +
                                                       " tensors, config implies " + std::to_string(refs.size()));
  }

  auto read = [&](const std::string& name) {
    const Entry& e = listed.at(name);
    std::vector<float> v(e.count);
    for (std::size_t i = 0; i < e.count; ++i) {
      v[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, payload_at + (e.offset + i) * 4));
    }
    return v;
  };
  auto read_matrix = [&](const std::string& name) {
    const Entry& e = listed.at(name);
    return Matrix(e.shape[0], e.shape[1], read(name));
  };

  std::vector<TransformerLayer> layers(static_cast<std::size_t>(cfg.n_layers));
  for (int i = 0; i < cfg.n_layers; ++i) {
    const std::string p = "layers." + std::to_string(i) + ".";
    auto& l = layers[static_cast<std::size_t>(i)];
    l.attn_norm = read(p + "attn_norm");
    l.wq = read_matrix(p + "wq");
    l.wk = read_matrix(p + "wk");
    l.wv = read_matrix(p + "wv");
    l.wo = read_matrix(p + "wo");
    l.ffn_norm = read(p + "ffn_norm");
    l.w_up = read_matrix(p + "w_up");
    l.w_down = read_matrix(p + "w_down");
  }
  return LayerStack(cfg, read_matrix("token_embedding"), read_matrix("position_embedding"), std::move(layers),
                    read("final_norm"), read_matrix("unembedding"));
}

void save_model(const LayerStack& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ModelError(ModelErrc::Io, "cannot open " + path.string() + " for writing");
  const std::string bytes = serialize_model(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ModelError(ModelErrc::Io, "write failed for " + path.string());
}

LayerStack load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError(ModelErrc::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

}  // namespace eelab::model
