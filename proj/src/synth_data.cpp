// Copyright 2026 The Realness Loop Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rloop/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "json.hpp"
#include "rloop/errors.hpp"
#include "rloop/image_io.hpp"
#include "rloop/kernels.hpp"

namespace rloop {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) {
  return splitmix64(splitmix64(splitmix64(a) ^ b) ^ c);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double normal(std::mt19937_64& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

// Planar [3, n, n] double image; u, v are pixel-centre coordinates in [0, 1).
using Planes = std::vector<double>;

Planes random_field(std::mt19937_64& rng, int64_t n, double detail) {
  constexpr int kWaves = 12;
  Planes out(static_cast<size_t>(3 * n * n), 0.0);
  double var[3] = {0.0, 0.0, 0.0};
  for (int k = 0; k < kWaves; ++k) {
    const double f = uniform(rng, 0.5, 3.0) * detail;
    const double theta = uniform(rng, 0.0, kTwoPi);
    const double fx = f * std::cos(theta), fy = f * std::sin(theta);
    for (int c = 0; c < 3; ++c) {
      const double amp = normal(rng) / (1.0 + f / detail);
      const double phase = uniform(rng, 0.0, kTwoPi);
      var[c] += 0.5 * amp * amp;
      for (int64_t y = 0; y < n; ++y) {
        const double v = (y + 0.5) / n;
        for (int64_t x = 0; x < n; ++x) {
          const double u = (x + 0.5) / n;
          out[(c * n + y) * n + x] += amp * std::sin(kTwoPi * (fx * u + fy * v) + phase);
        }
      }
    }
  }
  for (int c = 0; c < 3; ++c) {
    const double s = 1.0 / (3.0 * std::sqrt(std::max(var[c], 1e-12)));
    const double offset = uniform(rng, 0.35, 0.65);
    for (int64_t i = 0; i < n * n; ++i) out[c * n * n + i] = offset + s * out[c * n * n + i];
  }
  return out;
}

Planes gradient(std::mt19937_64& rng, int64_t n) {
  Planes out(static_cast<size_t>(3 * n * n));
  for (int c = 0; c < 3; ++c) {
    const double base = uniform(rng, 0.3, 0.7);
    const double mag = uniform(rng, 0.2, 0.6);
    const double theta = uniform(rng, 0.0, kTwoPi);
    const double gx = mag * std::cos(theta), gy = mag * std::sin(theta);
    for (int64_t y = 0; y < n; ++y) {
      for (int64_t x = 0; x < n; ++x) {
        const double u = (x + 0.5) / n - 0.5, v = (y + 0.5) / n - 0.5;
        out[(c * n + y) * n + x] = base + gx * u + gy * v;
      }
    }
  }
  return out;
}

Planes checker(std::mt19937_64& rng, int64_t n, double detail) {
  constexpr double kSharpness = 1.5;
  const double f = uniform(rng, 1.0, 2.5) * detail;
  const double theta = uniform(rng, 0.0, kTwoPi);
  const double px = uniform(rng, 0.0, kTwoPi), py = uniform(rng, 0.0, kTwoPi);
  double c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = uniform(rng, 0.15, 0.85);
    c1[c] = uniform(rng, 0.15, 0.85);
  }
  const double ct = std::cos(theta), st = std::sin(theta);
  Planes out(static_cast<size_t>(3 * n * n));
  for (int64_t y = 0; y < n; ++y) {
    for (int64_t x = 0; x < n; ++x) {
      const double u = (x + 0.5) / n - 0.5, v = (y + 0.5) / n - 0.5;
      const double ru = ct * u - st * v, rv = st * u + ct * v;
      const double s = std::sin(kTwoPi * f * ru + px) * std::sin(kTwoPi * f * rv + py);
      const double t = 0.5 + 0.5 * std::tanh(kSharpness * s) / std::tanh(kSharpness);
      for (int c = 0; c < 3; ++c) out[(c * n + y) * n + x] = c0[c] + (c1[c] - c0[c]) * t;
    }
  }
  return out;
}

Planes blobs(std::mt19937_64& rng, int64_t n, double detail) {
  Planes out(static_cast<size_t>(3 * n * n));
  double base[3];
  for (double& b : base) b = uniform(rng, 0.3, 0.7);
  for (int c = 0; c < 3; ++c) std::fill_n(out.begin() + c * n * n, n * n, base[c]);
  const int count = std::uniform_int_distribution<int>(3, 6)(rng);
  for (int k = 0; k < count; ++k) {
    const double cx = uniform(rng, 0.0, 1.0), cy = uniform(rng, 0.0, 1.0);
    const double sigma = uniform(rng, 0.08, 0.25) / detail;
    double delta[3];
    for (double& d : delta) d = 0.3 * normal(rng);
    for (int64_t y = 0; y < n; ++y) {
      for (int64_t x = 0; x < n; ++x) {
        const double dx = (x + 0.5) / n - cx, dy = (y + 0.5) / n - cy;
        const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        for (int c = 0; c < 3; ++c) out[(c * n + y) * n + x] += delta[c] * g;
      }
    }
  }
  return out;
}

// Bilinear sample of a planar image with reflected borders.
float sample(const Tensor& img, int64_t c, double x, double y) {
  const int64_t h = img.dim(1), w = img.dim(2);
  const double fx = std::floor(x), fy = std::floor(y);
  const double ax = x - fx, ay = y - fy;
  auto at = [&](int64_t yy, int64_t xx) {
    return img[(c * h + kernels::reflect_index(yy, h)) * w + kernels::reflect_index(xx, w)];
  };
  const auto x0 = static_cast<int64_t>(fx), y0 = static_cast<int64_t>(fy);
  return static_cast<float>((1 - ay) * ((1 - ax) * at(y0, x0) + ax * at(y0, x0 + 1)) +
                            ay * ((1 - ax) * at(y0 + 1, x0) + ax * at(y0 + 1, x0 + 1)));
}

}  // namespace

Tensor generate_real(const SceneSpec& spec, int64_t patch_size) {
  const int64_t n = spec.resolution;
  if (n < 32 || patch_size <= 0 || n % patch_size != 0) {
    throw ConfigError("scene resolution must be >= 32 and divisible by the patch size (" +
                      std::to_string(patch_size) + "), got " + std::to_string(n));
  }
  double total = 0.0;
  for (double w : spec.texture_mix) {
    if (w < 0.0) throw ConfigError("texture_mix weights must be non-negative");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-6) throw ConfigError("texture_mix must sum to 1");
  if (!(spec.detail_scale > 0.0)) throw ConfigError("detail_scale must be positive");

  std::mt19937_64 rng(spec.seed);
  // Components are always drawn in the same order so the RNG stream does not
  // depend on the weights.
  const Planes parts[4] = {random_field(rng, n, spec.detail_scale), gradient(rng, n),
                           checker(rng, n, spec.detail_scale), blobs(rng, n, spec.detail_scale)};
  Tensor out({3, n, n});
  for (int64_t i = 0; i < out.numel(); ++i) {
    double v = 0.0;
    for (int k = 0; k < 4; ++k) v += spec.texture_mix[k] * parts[k][i];
    out[i] = quantize8(static_cast<float>(v));
  }
  return out;
}

std::string to_string(ForgeryKind kind) {
  switch (kind) {
    case ForgeryKind::kSplice: return "splice";
    case ForgeryKind::kCopyMove: return "copy_move";
    case ForgeryKind::kNoiseFill: return "noise_fill";
    case ForgeryKind::kNone: return "none";
  }
  return "none";
}

ForgeryKind forgery_kind_from_string(const std::string& name) {
  if (name == "splice") return ForgeryKind::kSplice;
  if (name == "copy_move") return ForgeryKind::kCopyMove;
  if (name == "noise_fill") return ForgeryKind::kNoiseFill;
  if (name == "none") return ForgeryKind::kNone;
  throw ConfigError("unknown forgery kind '" + name + "'");
}

namespace {

Tensor forged_content(const Tensor& real, ForgeryKind kind, std::mt19937_64& rng,
                      double cx, double cy) {
  const int64_t h = real.dim(1), w = real.dim(2);
  switch (kind) {
    case ForgeryKind::kSplice: {
      SceneSpec donor;
      donor.seed = rng();
      donor.resolution = h;
      donor.detail_scale = 4.0;
      return generate_real(donor, 1);
    }
    case ForgeryKind::kCopyMove: {
      const double scale = uniform(rng, 2.5, 3.5);
      const double sx = uniform(rng, 0.0, w), sy = uniform(rng, 0.0, h);
      Tensor out(real.shape());
      for (int64_t c = 0; c < 3; ++c) {
        for (int64_t y = 0; y < h; ++y) {
          for (int64_t x = 0; x < w; ++x) {
            out[(c * h + y) * w + x] =
                sample(real, c, sx + (x - cx) * scale, sy + (y - cy) * scale);
          }
        }
      }
      return out;
    }
    case ForgeryKind::kNoiseFill: {
      constexpr double kAmplitude = 0.1;
      Tensor noise(real.shape());
      for (float& v : noise.values()) v = static_cast<float>(normal(rng));
      noise = gaussian_blur_image(noise, 0.8);
      double sq = 0.0;
      for (float v : noise.values()) sq += double(v) * v;
      const double gain = kAmplitude / std::sqrt(sq / static_cast<double>(noise.numel()));
      Tensor out = gaussian_blur_image(real, 4.0);
      for (int64_t i = 0; i < out.numel(); ++i) out[i] += static_cast<float>(gain * noise[i]);
      return out;
    }
    case ForgeryKind::kNone: break;
  }
  return real;
}

}  // namespace

ForgeryRecord forge(const Tensor& real, ForgeryKind kind, uint64_t rng_seed,
                    const ForgeOptions& options) {
  if (real.shape().size() != 3 || real.dim(0) != 3) {
    throw ShapeError("forge expects a [3, h, w] image, got " + shape_str(real.shape()));
  }
  const int64_t h = real.dim(1), w = real.dim(2);
  ForgeryRecord rec;
  rec.kind = kind;
  rec.forge_seed = rng_seed;
  if (kind == ForgeryKind::kNone) {
    if (options.area_target) throw ConfigError("forgery kind none cannot take a region");
    rec.image = real;
    rec.mask = Tensor({1, h, w}, 0.0f);
    return rec;
  }
  if (!(options.area_min > 0.0 && options.area_min < options.area_max && options.area_max <= 1.0)) {
    throw ConfigError("forge: invalid area range");
  }

  std::mt19937_64 rng(rng_seed);
  constexpr int kAttempts = 64;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const double area = options.area_target.value_or(uniform(rng, options.area_min, options.area_max));
    const bool ellipse = std::bernoulli_distribution(0.5)(rng);
    const double aspect = std::exp(uniform(rng, -0.5, 0.5));
    const double pixels = area * static_cast<double>(h * w);
    double rx, ry;
    if (ellipse) {
      rx = std::sqrt(pixels / (std::numbers::pi * aspect));
    } else {
      rx = 0.5 * std::sqrt(pixels / aspect);
    }
    ry = rx * aspect;
    auto centre = [&](double r, int64_t size) {
      return r < 0.5 * size ? uniform(rng, r, size - r) : 0.5 * size;
    };
    const double cx = centre(rx, w), cy = centre(ry, h);
    const Tensor content = forged_content(real, kind, rng, cx, cy);

    Tensor image = real;
    Tensor mask({1, h, w}, 0.0f);
    int64_t count = 0;
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        const double dx = std::fabs(x + 0.5 - cx), dy = std::fabs(y + 0.5 - cy);
        double inside;  // approximate signed distance to the boundary, in pixels
        if (ellipse) {
          inside = (1.0 - std::hypot(dx / rx, dy / ry)) * std::min(rx, ry);
        } else {
          inside = std::min(rx - dx, ry - dy);
        }
        const double alpha = std::clamp(0.5 + 0.5 * inside, 0.0, 1.0);
        if (alpha == 0.0) continue;
        bool changed = false;
        for (int64_t c = 0; c < 3; ++c) {
          const int64_t i = (c * h + y) * w + x;
          const float v = quantize8(static_cast<float>(alpha * content[i] + (1.0 - alpha) * real[i]));
          changed |= v != real[i];
          image[i] = v;
        }
        if (changed) {
          mask[y * w + x] = 1.0f;
          ++count;
        }
      }
    }
    const double frac = static_cast<double>(count) / static_cast<double>(h * w);
    bool ok = frac >= options.area_min && frac <= options.area_max;
    if (options.area_target) ok = ok && frac >= 0.5 * area && frac <= 2.0 * area;
    if (ok) {
      rec.image = std::move(image);
      rec.mask = std::move(mask);
      return rec;
    }
  }
  throw ConfigError("forge: could not place a region with the requested area");
}

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kPrior: return "prior";
  }
  return "train";
}

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  if (name == "prior") return Split::kPrior;
  throw ConfigError("unknown split '" + name + "'");
}

namespace {

struct Job {
  Split split;
  int64_t index;
};

std::vector<SplitRecord> run_jobs(const std::vector<Job>& jobs, uint64_t seed, int64_t resolution,
                                  double forged_fraction) {
  std::vector<SplitRecord> out(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
#pragma omp parallel for schedule(dynamic)
  for (int64_t j = 0; j < static_cast<int64_t>(jobs.size()); ++j) {
    try {
      const Job& job = jobs[j];
      const auto tag = static_cast<uint64_t>(job.split) + 1;
      SceneSpec spec;
      spec.seed = mix_seed(seed, tag, static_cast<uint64_t>(job.index));
      spec.resolution = resolution;
      std::mt19937_64 rng(mix_seed(spec.seed, 0x66f7a3e1ULL, 0));
      ForgeryKind kind = ForgeryKind::kNone;
      if (uniform(rng, 0.0, 1.0) < forged_fraction) {
        kind = static_cast<ForgeryKind>(std::uniform_int_distribution<int>(0, 2)(rng));
      }
      const Tensor real = generate_real(spec);
      SplitRecord& r = out[j];
      r.split = job.split;
      r.record = forge(real, kind, rng());
      r.record.source_seed = spec.seed;
      char id[32];
      std::snprintf(id, sizeof(id), "%s_%04lld", to_string(job.split).c_str(),
                    static_cast<long long>(job.index));
      r.record.id = id;
    } catch (...) {
      errors[j] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace

std::vector<SplitRecord> generate_dataset(const DatasetSpec& spec) {
  if (spec.n_train < 0 || spec.n_val < 0 || spec.n_test < 0) {
    throw ConfigError("split sizes must be non-negative");
  }
  if (spec.forged_fraction < 0.0 || spec.forged_fraction > 1.0) {
    throw ConfigError("forged_fraction must be in [0, 1]");
  }
  std::vector<Job> jobs;
  for (auto [split, n] : {std::pair{Split::kTrain, spec.n_train}, std::pair{Split::kVal, spec.n_val},
                          std::pair{Split::kTest, spec.n_test}}) {
    for (int64_t i = 0; i < n; ++i) jobs.push_back({split, i});
  }
  return run_jobs(jobs, spec.seed, spec.resolution, spec.forged_fraction);
}

std::vector<SplitRecord> generate_prior_set(uint64_t seed, int64_t n, int64_t resolution) {
  std::vector<Job> jobs;
  for (int64_t i = 0; i < n; ++i) jobs.push_back({Split::kPrior, i});
  return run_jobs(jobs, seed, resolution, 0.0);
}

void validate_manifest(const DatasetManifest& manifest, const std::string& manifest_path) {
  std::map<std::string, Split> path_split;
  std::map<uint64_t, Split> seed_split;
  for (const auto& e : manifest.records) {
    for (const std::string* p : {&e.image_path, &e.mask_path}) {
      auto [it, fresh] = path_split.emplace(*p, e.split);
      if (!fresh && it->second != e.split) {
        throw IngestionError(manifest_path, "path '" + *p + "' appears in splits " +
                                                to_string(it->second) + " and " +
                                                to_string(e.split));
      }
    }
    auto [it, fresh] = seed_split.emplace(e.seed, e.split);
    if (!fresh && it->second != e.split) {
      throw IngestionError(manifest_path, "scene seed " + std::to_string(e.seed) +
                                              " appears in two splits");
    }
  }
}

DatasetManifest write_dataset(const std::vector<SplitRecord>& records,
                              const std::string& manifest_path) {
  const fs::path root = fs::path(manifest_path).parent_path();
  DatasetManifest manifest;
  for (const auto& r : records) {
    ManifestEntry e;
    e.id = r.record.id;
    e.split = r.split;
    e.image_path = "images/" + r.record.id + ".png";
    e.mask_path = "masks/" + r.record.id + ".png";
    e.kind = r.record.kind;
    e.seed = r.record.source_seed;
    e.forge_seed = r.record.forge_seed;
    manifest.records.push_back(e);
  }
  validate_manifest(manifest, manifest_path);
  std::error_code ec;
  fs::create_directories(root / "images", ec);
  fs::create_directories(root / "masks", ec);
  if (ec) throw IngestionError(root.string(), "cannot create dataset directories");

  std::vector<std::exception_ptr> errors(records.size());
#pragma omp parallel for schedule(dynamic)
  for (int64_t i = 0; i < static_cast<int64_t>(records.size()); ++i) {
    try {
      ManifestEntry& e = manifest.records[i];
      const std::string image = (root / e.image_path).string();
      const std::string mask = (root / e.mask_path).string();
      write_png(image, records[i].record.image);
      write_png(mask, records[i].record.mask);
      e.image_crc32 = file_crc32(image);
      e.mask_crc32 = file_crc32(mask);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  json j;
  j["generator_version"] = manifest.generator_version;
  j["records"] = json::array();
  for (const auto& e : manifest.records) {
    j["records"].push_back({{"id", e.id},
                            {"split", to_string(e.split)},
                            {"image", e.image_path},
                            {"mask", e.mask_path},
                            {"kind", to_string(e.kind)},
                            {"seed", e.seed},
                            {"forge_seed", e.forge_seed},
                            {"image_crc32", e.image_crc32},
                            {"mask_crc32", e.mask_crc32}});
  }
  std::ofstream out(manifest_path);
  if (!out) throw IngestionError(manifest_path, "cannot write manifest");
  out << j.dump(1) << '\n';
  return manifest;
}

DatasetManifest read_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IngestionError(manifest_path, "cannot open manifest");
  DatasetManifest manifest;
  try {
    const json j = json::parse(in);
    manifest.generator_version = j.at("generator_version").get<std::string>();
    for (const auto& r : j.at("records")) {
      ManifestEntry e;
      e.id = r.at("id").get<std::string>();
      e.split = split_from_string(r.at("split").get<std::string>());
      e.image_path = r.at("image").get<std::string>();
      e.mask_path = r.at("mask").get<std::string>();
      e.kind = forgery_kind_from_string(r.at("kind").get<std::string>());
      e.seed = r.at("seed").get<uint64_t>();
      e.forge_seed = r.value("forge_seed", uint64_t{0});
      e.image_crc32 = r.at("image_crc32").get<uint32_t>();
      e.mask_crc32 = r.at("mask_crc32").get<uint32_t>();
      manifest.records.push_back(std::move(e));
    }
  } catch (const json::exception& ex) {
    throw IngestionError(manifest_path, std::string("malformed manifest: ") + ex.what());
  } catch (const ConfigError& ex) {
    throw IngestionError(manifest_path, ex.what());
  }
  return manifest;
}

std::vector<ForgeryRecord> load_dataset(const std::string& manifest_path,
                                        std::optional<Split> split) {
  const DatasetManifest manifest = read_manifest(manifest_path);
  validate_manifest(manifest, manifest_path);
  const fs::path root = fs::path(manifest_path).parent_path();
  std::vector<const ManifestEntry*> entries;
  for (const auto& e : manifest.records) {
    if (!split || e.split == *split) entries.push_back(&e);
  }
  std::vector<ForgeryRecord> out(entries.size());
  std::vector<std::exception_ptr> errors(entries.size());
#pragma omp parallel for schedule(dynamic)
  for (int64_t i = 0; i < static_cast<int64_t>(entries.size()); ++i) {
    try {
      const ManifestEntry& e = *entries[i];
      const std::string image = (root / e.image_path).string();
      const std::string mask = (root / e.mask_path).string();
      for (auto [p, crc] : {std::pair{&image, e.image_crc32}, std::pair{&mask, e.mask_crc32}}) {
        if (!fs::exists(*p)) throw IngestionError(*p, "missing file");
        if (file_crc32(*p) != crc) throw IngestionError(*p, "checksum mismatch");
      }
      ForgeryRecord& r = out[i];
      r.id = e.id;
      r.kind = e.kind;
      r.source_seed = e.seed;
      r.forge_seed = e.forge_seed;
      r.image = read_png(image);
      r.mask = read_png(mask);
      if (r.image.dim(0) != 3) throw IngestionError(image, "expected an RGB image");
      if (r.mask.dim(0) != 1 || r.mask.dim(1) != r.image.dim(1) ||
          r.mask.dim(2) != r.image.dim(2)) {
        throw IngestionError(mask, "mask shape does not match image");
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

namespace {

Tensor stack(const std::vector<ForgeryRecord>& records, bool masks) {
  if (records.empty()) return Tensor({0, masks ? 1 : 3, 0, 0});
  const Tensor& first = masks ? records[0].mask : records[0].image;
  Shape shape{static_cast<int64_t>(records.size())};
  shape.insert(shape.end(), first.shape().begin(), first.shape().end());
  Tensor out(shape);
  const int64_t per = first.numel();
  for (size_t i = 0; i < records.size(); ++i) {
    const Tensor& t = masks ? records[i].mask : records[i].image;
    if (t.shape() != first.shape()) throw ShapeError("stack: records differ in shape");
    std::copy(t.data(), t.data() + per, out.data() + i * per);
  }
  return out;
}

}  // namespace

Tensor stack_images(const std::vector<ForgeryRecord>& records) { return stack(records, false); }
Tensor stack_masks(const std::vector<ForgeryRecord>& records) { return stack(records, true); }

}  // namespace rloop
