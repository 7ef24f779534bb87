// Copyright 2026 The movox Authors
// SPDX-License-Identifier: Apache-2.0

#include "movox/data/dataset.hpp"

#include <filesystem>
#include <fstream>

#include "movox/data/png.hpp"
#include "movox/error.hpp"

namespace movox::data {

namespace fs = std::filesystem;

nlohmann::json camera_to_json(const render::Camera& c) {
  return {{"width", c.width}, {"height", c.height}, {"fx", c.fx},   {"fy", c.fy},
          {"cx", c.cx},       {"cy", c.cy},         {"rotation", c.rotation}, {"translation", c.translation}};
}

render::Camera camera_from_json(const nlohmann::json& j) {
  render::Camera c;
  c.width = j.at("width").get<std::size_t>();
  c.height = j.at("height").get<std::size_t>();
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  c.rotation = j.at("rotation").get<std::array<double, 9>>();
  c.translation = j.at("translation").get<std::array<double, 3>>();
  return c;
}

nlohmann::json to_json(const Manifest& m) {
  nlohmann::json frames = nlohmann::json::array();
  for (const FrameSpec& f : m.frames) {
    nlohmann::json jf{{"image", f.image}, {"split", f.split}, {"camera", camera_to_json(f.camera)}, {"theta", f.theta}};
    if (f.mask) jf["mask"] = *f.mask;
    frames.push_back(std::move(jf));
  }
  return {{"version", m.version},
          {"expression_dims", m.expression_dims},
          {"box", {{"min", m.box.min}, {"edge", m.box.edge}}},
          {"near", m.near},
          {"far", m.far},
          {"background", m.background},
          {"frames", std::move(frames)}};
}

Manifest manifest_from_json(const nlohmann::json& j) {
  Manifest m;
  try {
    m.version = j.at("version").get<int>();
    if (m.version != kManifestVersion) {
      throw IoError("manifest version " + std::to_string(m.version) + " is not supported (expected " +
                    std::to_string(kManifestVersion) + ")");
    }
    m.expression_dims = j.at("expression_dims").get<std::size_t>();
    if (j.contains("box")) {
      m.box.min = j.at("box").at("min").get<std::array<double, 3>>();
      m.box.edge = j.at("box").at("edge").get<double>();
    }
    m.near = j.value("near", m.near);
    m.far = j.value("far", m.far);
    if (j.contains("background")) m.background = j.at("background").get<std::array<double, 3>>();
    for (const auto& jf : j.at("frames")) {
      FrameSpec f;
      f.image = jf.value("image", "");
      if (jf.contains("mask")) f.mask = jf.at("mask").get<std::string>();
      f.split = jf.value("split", "train");
      f.camera = camera_from_json(jf.at("camera"));
      f.theta = jf.at("theta").get<std::vector<double>>();
      m.frames.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
  if (!(m.box.edge > 0.0)) throw IoError("manifest: box edge must be positive");
  if (!(m.near < m.far)) throw IoError("manifest: near must be below far");
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    const FrameSpec& f = m.frames[i];
    if (f.theta.size() != m.expression_dims) {
      throw IoError("frame " + std::to_string(i) + ": theta has " + std::to_string(f.theta.size()) +
                    " entries, manifest declares N = " + std::to_string(m.expression_dims));
    }
    try {
      f.camera.validate();
    } catch (const ContractError& e) {
      throw IoError("frame " + std::to_string(i) + ": " + e.what());
    }
  }
  return m;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("manifest '" + path + "' is not valid JSON: " + e.what());
  }
  Manifest m = manifest_from_json(j);
  m.directory = fs::path(path).parent_path().string();
  return m;
}

void save_manifest(const Manifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest '" + path + "'");
  out << to_json(m).dump(2) << "\n";
  if (!out) throw IoError("failed writing manifest '" + path + "'");
}

Image area_downsample(const Image& image, std::size_t factor) {
  if (factor == 0 || image.width % factor != 0 || image.height % factor != 0) {
    throw ContractError("area_downsample: factor " + std::to_string(factor) + " does not divide " +
                        std::to_string(image.width) + "x" + std::to_string(image.height));
  }
  if (factor == 1) return image;
  Image out(image.width / factor, image.height / factor, image.channels);
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      for (std::size_t c = 0; c < image.channels; ++c) {
        double acc = 0.0;
        for (std::size_t dy = 0; dy < factor; ++dy) {
          for (std::size_t dx = 0; dx < factor; ++dx) acc += image.at(x * factor + dx, y * factor + dy, c);
        }
        out.at(x, y, c) = static_cast<float>(acc * inv);
      }
    }
  }
  return out;
}

Image composite_mask(const Image& image, const Image& mask, const std::array<double, 3>& background) {
  if (mask.width != image.width || mask.height != image.height || mask.channels != 1 || image.channels < 3) {
    throw ContractError("composite_mask: mask must be single-channel and match the image size");
  }
  Image out(image.width, image.height, 3);
  for (std::size_t p = 0; p < image.pixel_count(); ++p) {
    const double m = mask.pixels[p];
    for (std::size_t c = 0; c < 3; ++c) {
      out.pixels[3 * p + c] = static_cast<float>(image.pixels[p * image.channels + c] * m + background[c] * (1.0 - m));
    }
  }
  return out;
}

Dataset load_dataset(const std::string& manifest_path, const LoadOptions& options) {
  Dataset ds;
  ds.manifest = load_manifest(manifest_path);
  const Manifest& m = ds.manifest;
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    const FrameSpec& spec = m.frames[i];
    if (!options.split.empty() && spec.split != options.split) continue;
    Frame f;
    f.index = i;
    f.theta = spec.theta;
    std::size_t factor = 1;
    if (options.resolution != 0) {
      if (options.resolution > spec.camera.width || spec.camera.width % options.resolution != 0) {
        throw IoError("frame " + std::to_string(i) + ": cannot area-downsample width " +
                      std::to_string(spec.camera.width) + " to " + std::to_string(options.resolution));
      }
      factor = spec.camera.width / options.resolution;
      if (spec.camera.height % factor != 0) {
        throw IoError("frame " + std::to_string(i) + ": height " + std::to_string(spec.camera.height) +
                      " is not divisible by the downsampling factor " + std::to_string(factor));
      }
    }
    f.camera = spec.camera.resized(spec.camera.width / factor, spec.camera.height / factor);
    if (options.load_images) {
      const std::string path = (fs::path(m.directory) / spec.image).string();
      if (spec.image.empty() || !fs::exists(path)) {
        throw IoError("frame " + std::to_string(i) + ": image file '" + path + "' does not exist");
      }
      Image img = read_png(path);
      if (img.width != spec.camera.width || img.height != spec.camera.height) {
        throw IoError("frame " + std::to_string(i) + ": image is " + std::to_string(img.width) + "x" +
                      std::to_string(img.height) + " but the camera is " + std::to_string(spec.camera.width) +
                      "x" + std::to_string(spec.camera.height));
      }
      if (img.channels == 1) throw IoError("frame " + std::to_string(i) + ": image must be RGB");
      if (spec.mask) {
        const std::string mpath = (fs::path(m.directory) / *spec.mask).string();
        if (!fs::exists(mpath)) throw IoError("frame " + std::to_string(i) + ": mask file '" + mpath + "' does not exist");
        Image mask = read_png(mpath);
        if (mask.channels != 1) throw IoError("frame " + std::to_string(i) + ": mask must be grayscale");
        img = composite_mask(img, mask, m.background);
      } else if (img.channels == 4) {
        Image alpha(img.width, img.height, 1);
        for (std::size_t p = 0; p < img.pixel_count(); ++p) alpha.pixels[p] = img.pixels[4 * p + 3];
        img = composite_mask(img, alpha, m.background);
      }
      f.rgb = area_downsample(img, factor);
    }
    ds.frames.push_back(std::move(f));
  }
  if (ds.frames.empty()) throw IoError("empty dataset");
  return ds;
}

}  // namespace movox::data
