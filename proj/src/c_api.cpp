// Copyright 2026 The VesselFusion Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vesselfusion/vesselfusion.h"

#include <cstring>
#include <iostream>
#include <memory>
#include <new>
#include <string>

#include "vesselfusion/pipeline.hpp"

struct vf_config {
  vf::RunConfig cfg;
};
struct vf_volume {
  vf::Volume vol;
};
struct vf_centerline {
  vf::Centerline points;
};
struct vf_model {
  vf::DenoiserModel model;
};

namespace {

thread_local std::string g_last_error;
thread_local int g_last_epoch = 0;

template <typename Fn>
vf_status guarded(Fn&& fn) {
  try {
    fn();
    return VF_OK;
  } catch (const vf::DivergenceError& e) {
    g_last_error = e.what();
    g_last_epoch = e.epoch();
    return VF_ERR_DIVERGENCE;
  } catch (const vf::UsageError& e) {
    g_last_error = e.what();
    return VF_ERR_USAGE;
  } catch (const vf::FormatError& e) {
    g_last_error = e.what();
    return VF_ERR_DATA;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return VF_ERR_DATA;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return VF_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return VF_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return VF_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw vf::UsageError(std::string(what) + " must not be NULL");
}

std::ostream* progress(int verbose) { return verbose ? &std::cerr : nullptr; }

}  // namespace

extern "C" {

const char* vf_version(void) { return "0.1.0"; }
const char* vf_last_error(void) { return g_last_error.c_str(); }
int vf_last_divergence_epoch(void) { return g_last_epoch; }

vf_status vf_config_create(vf_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new vf_config{};
  });
}

vf_status vf_config_load(const char* path, vf_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new vf_config{vf::RunConfig::load(path)};
  });
}

vf_status vf_config_set(vf_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    cfg->cfg.set(key, value);
  });
}

vf_status vf_config_get(const vf_config* cfg, const char* key, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    const std::string& v = cfg->cfg.get(key);
    if (needed) *needed = v.size() + 1;
    if (buf && cap > v.size()) std::memcpy(buf, v.c_str(), v.size() + 1);
  });
}

vf_status vf_config_validate(const vf_config* cfg) {
  return guarded([&] {
    require(cfg, "cfg");
    cfg->cfg.validate();
  });
}

vf_status vf_config_write(const vf_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "cfg");
    require(path, "path");
    cfg->cfg.write(path);
  });
}

vf_status vf_config_echo(const vf_config* cfg, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    require(cfg, "cfg");
    const std::string text = cfg->cfg.echo();
    if (needed) *needed = text.size() + 1;
    if (buf && cap > text.size()) std::memcpy(buf, text.c_str(), text.size() + 1);
  });
}

void vf_config_destroy(vf_config* cfg) { delete cfg; }

vf_status vf_volume_create(int x, int y, int z, const float* data, vf_volume** out) {
  return guarded([&] {
    require(out, "out");
    require(data, "data");
    const vf::Dims dims{x, y, z};
    if (!dims.valid()) throw vf::UsageError("invalid volume dims " + vf::to_string(dims));
    std::vector<float> values(data, data + dims.count());
    *out = new vf_volume{vf::Volume(dims, std::move(values))};
  });
}

vf_status vf_volume_load(const char* path, vf_volume** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new vf_volume{vf::load_volume(path)};
  });
}

vf_status vf_volume_save(const vf_volume* vol, const char* path) {
  return guarded([&] {
    require(vol, "vol");
    require(path, "path");
    vf::save_volume(vol->vol, path);
  });
}

vf_status vf_volume_dims(const vf_volume* vol, int* x, int* y, int* z) {
  return guarded([&] {
    require(vol, "vol");
    const vf::Dims& d = vol->vol.dims();
    if (x) *x = d.x;
    if (y) *y = d.y;
    if (z) *z = d.z;
  });
}

void vf_volume_destroy(vf_volume* vol) { delete vol; }

vf_status vf_centerline_create(const int* xyz, size_t n, vf_centerline** out) {
  return guarded([&] {
    require(out, "out");
    if (n > 0) require(xyz, "xyz");
    std::vector<vf::Voxel> pts;
    pts.reserve(n);
    for (size_t i = 0; i < n; ++i) pts.push_back({xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]});
    *out = new vf_centerline{vf::Centerline(std::move(pts))};
  });
}

vf_status vf_centerline_load(const char* path, vf_centerline** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new vf_centerline{vf::load_centerline(path)};
  });
}

vf_status vf_centerline_save(const vf_centerline* c, const char* path) {
  return guarded([&] {
    require(c, "c");
    require(path, "path");
    vf::save_centerline(c->points, path);
  });
}

size_t vf_centerline_size(const vf_centerline* c) { return c ? c->points.size() : 0; }

vf_status vf_centerline_points(const vf_centerline* c, int* xyz, size_t cap) {
  return guarded([&] {
    require(c, "c");
    if (cap > 0) require(xyz, "xyz");
    size_t i = 0;
    for (const vf::Voxel& v : c->points) {
      if (i == cap) break;
      xyz[3 * i] = v.x;
      xyz[3 * i + 1] = v.y;
      xyz[3 * i + 2] = v.z;
      ++i;
    }
  });
}

void vf_centerline_destroy(vf_centerline* c) { delete c; }

vf_status vf_evaluate(const vf_centerline* pred, const vf_centerline* gt, double radius, vf_match* out) {
  return guarded([&] {
    require(pred, "pred");
    require(gt, "gt");
    require(out, "out");
    const vf::MatchReport r = vf::precision_recall(pred->points, gt->points, radius);
    *out = {r.precision, r.recall, r.f1, r.degenerate_pred ? 1 : 0, r.degenerate_gt ? 1 : 0};
  });
}

vf_status vf_betti(const vf_centerline* c, int connectivity, long* betti0, long* betti1) {
  return guarded([&] {
    require(c, "c");
    vf::Connectivity conn;
    if (connectivity == 6) {
      conn = vf::Connectivity::k6;
    } else if (connectivity == 26) {
      conn = vf::Connectivity::k26;
    } else {
      throw vf::UsageError("connectivity must be 6 or 26");
    }
    const vf::BettiReport b = vf::betti_numbers(c->points, conn);
    if (betti0) *betti0 = b.betti0;
    if (betti1) *betti1 = b.betti1;
  });
}

vf_status vf_model_load(const vf_config* cfg, const char* ckpt_path, vf_model** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(ckpt_path, "ckpt_path");
    require(out, "out");
    *out = new vf_model{vf::load_model(cfg->cfg, ckpt_path)};
  });
}

vf_status vf_model_extract(const vf_model* model, const vf_config* cfg, const vf_volume* vol,
                           vf_centerline** out, int* tau_used) {
  return guarded([&] {
    require(model, "model");
    require(cfg, "cfg");
    require(vol, "vol");
    require(out, "out");
    const vf::SamplerConfig sampler = cfg->cfg.sampler();
    if (sampler.steps != model->model.schedule().steps()) {
      throw vf::UsageError("configuration T differs from the model schedule");
    }
    const vf::VoteResult r = vf::aggregate(model->model, vol->vol, cfg->cfg.voting(), sampler,
                                           model->model.schedule(), model->model.config().codec);
    if (tau_used) *tau_used = r.tau_used;
    *out = new vf_centerline{r.aggregated};
  });
}

void vf_model_destroy(vf_model* model) { delete model; }

vf_status vf_cmd_synth(const vf_config* cfg, const char* out_dir, int force) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_dir, "out_dir");
    vf::cmd_synth(cfg->cfg, out_dir, force != 0);
  });
}

vf_status vf_cmd_train(const vf_config* cfg, const char* data_dir, const char* ckpt_out, int verbose) {
  return guarded([&] {
    require(cfg, "cfg");
    require(data_dir, "data_dir");
    require(ckpt_out, "ckpt_out");
    vf::cmd_train(cfg->cfg, data_dir, ckpt_out, progress(verbose));
  });
}

vf_status vf_cmd_extract(const vf_config* cfg, const char* ckpt, const char* volume_path,
                         const char* out_path) {
  return guarded([&] {
    require(cfg, "cfg");
    require(ckpt, "ckpt");
    require(volume_path, "volume_path");
    require(out_path, "out_path");
    vf::cmd_extract(cfg->cfg, ckpt, volume_path, out_path);
  });
}

vf_status vf_cmd_extract_split(const vf_config* cfg, const char* ckpt, const char* data_dir,
                               const char* split, const char* out_dir, int verbose) {
  return guarded([&] {
    require(cfg, "cfg");
    require(ckpt, "ckpt");
    require(data_dir, "data_dir");
    require(split, "split");
    require(out_dir, "out_dir");
    vf::cmd_extract_split(cfg->cfg, ckpt, data_dir, split, out_dir, progress(verbose));
  });
}

vf_status vf_cmd_eval(const vf_config* cfg, const char* pred_dir, const char* gt_dir, const char* split,
                      const char* out_csv, int* degenerate_cases) {
  return guarded([&] {
    require(cfg, "cfg");
    require(pred_dir, "pred_dir");
    require(gt_dir, "gt_dir");
    require(split, "split");
    require(out_csv, "out_csv");
    const auto reports =
        vf::cmd_eval(pred_dir, gt_dir, cfg->cfg.radii(), cfg->cfg.connectivity(), split, out_csv);
    if (degenerate_cases) {
      int n = 0;
      for (const auto& r : reports) n += r.matches.front().degenerate_pred ? 1 : 0;
      *degenerate_cases = n;
    }
  });
}

vf_status vf_cmd_sweep(const vf_config* cfg, const char* ckpt, const char* data_dir, const char* out_prefix,
                       int verbose) {
  return guarded([&] {
    require(cfg, "cfg");
    require(ckpt, "ckpt");
    require(data_dir, "data_dir");
    require(out_prefix, "out_prefix");
    vf::cmd_sweep(cfg->cfg, ckpt, data_dir, cfg->cfg.sweep_k(), out_prefix, progress(verbose));
  });
}

}  // extern "C"
