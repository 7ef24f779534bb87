// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/train/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "movox/error.hpp"

namespace movox::train {

namespace {

constexpr char kMagic[8] = {'M', 'O', 'V', 'O', 'X', 'C', 'K', '\0'};

template <typename T>
void put(std::ofstream& out, T v) {
  unsigned char b[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), sizeof b);
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof b)) throw IoError("checkpoint '" + path + "' is truncated");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
  return v;
}

void put_floats(std::ofstream& out, const diff::Buffer<float>& b) {
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size() * sizeof(float)));
}

}  // namespace

void save_checkpoint(const std::string& path, const fields::ModelConfig& model, const TrainConfig& train,
                     std::size_t iteration, const diff::ParamStore<float>& store) {
  nlohmann::json params = nlohmann::json::array();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& p = store[diff::ParamId{i}];
    params.push_back({{"name", p.name},
                      {"group", diff::to_string(p.group)},
                      {"shape", p.value.shape()},
                      {"step", store.moments(diff::ParamId{i}).step},
                      {"offset", offset}});
    offset += 3 * p.value.size();
  }
  const nlohmann::json header{{"variant", fields::to_string(model.variant)},
                              {"model", fields::to_json(model)},
                              {"train", to_json(train)},
                              {"iteration", iteration},
                              {"params", params}};
  const std::string text = header.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint '" + tmp + "'");
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (std::size_t i = 0; i < store.size(); ++i) {
      const diff::ParamId id{i};
      put_floats(out, store[id].value);
      put_floats(out, store.moments(id).m);
      put_floats(out, store.moments(id).v);
    }
    if (!out) throw IoError("failed writing checkpoint '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at '" + path + "': " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw IoError("'" + path + "' is not a movox checkpoint");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint '" + path + "' has format version " + std::to_string(version) + ", expected " +
                  std::to_string(kCheckpointVersion));
  }
  const auto length = get<std::uint64_t>(in, path);
  if (length > (1ull << 30)) throw IoError("checkpoint '" + path + "' header is implausibly large");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) throw IoError("checkpoint '" + path + "' is truncated");

  Checkpoint ck;
  try {
    const auto header = nlohmann::json::parse(text);
    ck.model = fields::model_config_from_json(header.at("model"));
    ck.train = train_config_from_json(header.at("train"));
    ck.iteration = header.at("iteration").get<std::size_t>();
    for (const auto& jp : header.at("params")) {
      const diff::Shape shape = jp.at("shape").get<diff::Shape>();
      diff::Buffer<float> value(shape), m(shape), v(shape);
      for (diff::Buffer<float>* b : {&value, &m, &v}) {
        if (!in.read(reinterpret_cast<char*>(b->data()), static_cast<std::streamsize>(b->size() * sizeof(float)))) {
          throw IoError("checkpoint '" + path + "' is truncated in parameter '" + jp.at("name").get<std::string>() + "'");
        }
      }
      const diff::ParamId id = ck.store.add(jp.at("name").get<std::string>(),
                                            diff::parse_param_group(jp.at("group").get<std::string>()),
                                            std::move(value));
      auto& mom = ck.store.moments(id);
      mom.m = std::move(m);
      mom.v = std::move(v);
      mom.step = jp.at("step").get<std::uint64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint '" + path + "' has a malformed header: " + e.what());
  } catch (const ContractError& e) {
    throw IoError("checkpoint '" + path + "': " + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("checkpoint '" + path + "' has trailing bytes");
  return ck;
}

}  // namespace movox::train
