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

/* C interface of the vesselfusion shared library.
 *
 * Every function returns a vf_status. On failure the message of the most
 * recent error on the calling thread is available from vf_last_error().
 * Objects are opaque handles created by *_create / *_load and released by the
 * matching *_destroy, which accepts NULL.
 */
#ifndef VESSELFUSION_H
#define VESSELFUSION_H

#include <stddef.h>

#if defined(_WIN32)
#  if defined(VF_BUILDING_LIBRARY)
#    define VF_API __declspec(dllexport)
#  else
#    define VF_API __declspec(dllimport)
#  endif
#else
#  define VF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vf_status {
  VF_OK = 0,
  VF_ERR_INTERNAL = 1,   /* unexpected failure */
  VF_ERR_USAGE = 2,      /* invalid argument or configuration */
  VF_ERR_DATA = 3,       /* malformed or missing file */
  VF_ERR_DIVERGENCE = 4  /* training produced non-finite values */
} vf_status;

typedef struct vf_config vf_config;
typedef struct vf_volume vf_volume;
typedef struct vf_centerline vf_centerline;
typedef struct vf_model vf_model;

typedef struct vf_match {
  double precision;
  double recall;
  double f1;
  int degenerate_pred; /* prediction was empty */
  int degenerate_gt;   /* ground truth was empty */
} vf_match;

VF_API const char* vf_version(void);
/* Message of the last failed call on this thread, "" if none. */
VF_API const char* vf_last_error(void);
/* Epoch of the last VF_ERR_DIVERGENCE on this thread, 0 if none. */
VF_API int vf_last_divergence_epoch(void);

/* ---- configuration ---- */
VF_API vf_status vf_config_create(vf_config** out);
VF_API vf_status vf_config_load(const char* path, vf_config** out);
VF_API vf_status vf_config_set(vf_config* cfg, const char* key, const char* value);
/* Copies the value with its terminator into buf when it fits; *needed gets
 * strlen(value) + 1 either way. buf may be NULL when cap is 0. */
VF_API vf_status vf_config_get(const vf_config* cfg, const char* key, char* buf, size_t cap,
                               size_t* needed);
VF_API vf_status vf_config_validate(const vf_config* cfg);
VF_API vf_status vf_config_write(const vf_config* cfg, const char* path);
/* Effective configuration in file syntax; same buffer contract as vf_config_get. */
VF_API vf_status vf_config_echo(const vf_config* cfg, char* buf, size_t cap, size_t* needed);
VF_API void vf_config_destroy(vf_config* cfg);

/* ---- volumes ---- */
/* data holds x * y * z floats, x fastest. */
VF_API vf_status vf_volume_create(int x, int y, int z, const float* data, vf_volume** out);
VF_API vf_status vf_volume_load(const char* path, vf_volume** out);
VF_API vf_status vf_volume_save(const vf_volume* vol, const char* path);
VF_API vf_status vf_volume_dims(const vf_volume* vol, int* x, int* y, int* z);
VF_API void vf_volume_destroy(vf_volume* vol);

/* ---- centerlines ---- */
/* xyz holds n consecutive (x, y, z) triples; duplicates are merged. */
VF_API vf_status vf_centerline_create(const int* xyz, size_t n, vf_centerline** out);
VF_API vf_status vf_centerline_load(const char* path, vf_centerline** out);
VF_API vf_status vf_centerline_save(const vf_centerline* c, const char* path);
VF_API size_t vf_centerline_size(const vf_centerline* c);
/* Writes min(cap, size) triples in lexicographic order. */
VF_API vf_status vf_centerline_points(const vf_centerline* c, int* xyz, size_t cap);
VF_API void vf_centerline_destroy(vf_centerline* c);

/* ---- metrics ---- */
VF_API vf_status vf_evaluate(const vf_centerline* pred, const vf_centerline* gt, double radius,
                             vf_match* out);
/* connectivity is 6 or 26. */
VF_API vf_status vf_betti(const vf_centerline* c, int connectivity, long* betti0, long* betti1);

/* ---- trained model ---- */
/* Fails with VF_ERR_USAGE listing differing hyperparameters when the
 * checkpoint does not match cfg. */
VF_API vf_status vf_model_load(const vf_config* cfg, const char* ckpt_path, vf_model** out);
/* K samples, decode, vote and threshold as configured in cfg. tau_used may be NULL. */
VF_API vf_status vf_model_extract(const vf_model* model, const vf_config* cfg, const vf_volume* vol,
                                  vf_centerline** out, int* tau_used);
VF_API void vf_model_destroy(vf_model* model);

/* ---- file-level commands (verbose != 0 prints progress to stderr) ---- */
VF_API vf_status vf_cmd_synth(const vf_config* cfg, const char* out_dir, int force);
VF_API vf_status vf_cmd_train(const vf_config* cfg, const char* data_dir, const char* ckpt_out,
                              int verbose);
VF_API vf_status vf_cmd_extract(const vf_config* cfg, const char* ckpt, const char* volume_path,
                                const char* out_path);
VF_API vf_status vf_cmd_extract_split(const vf_config* cfg, const char* ckpt, const char* data_dir,
                                      const char* split, const char* out_dir, int verbose);
/* Radii and connectivity come from cfg. degenerate_cases (may be NULL) gets
 * the number of cases with an empty prediction. */
VF_API vf_status vf_cmd_eval(const vf_config* cfg, const char* pred_dir, const char* gt_dir,
                             const char* split, const char* out_csv, int* degenerate_cases);
/* K values come from the sweep_k key of cfg. */
VF_API vf_status vf_cmd_sweep(const vf_config* cfg, const char* ckpt, const char* data_dir,
                              const char* out_prefix, int verbose);

#ifdef __cplusplus
}
#endif

#endif /* VESSELFUSION_H */
