#ifndef SPLATNAV_H
#define SPLATNAV_H

/* Generated by cbindgen. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum SplatnavStatus {
  SPLATNAV_STATUS_OK = 0,
  SPLATNAV_STATUS_NULL_POINTER = 1,
  SPLATNAV_STATUS_INVALID_ARGUMENT = 2,
  SPLATNAV_STATUS_IO = 3,
  SPLATNAV_STATUS_PARSE = 4,
  SPLATNAV_STATUS_PANIC = 5,
} SplatnavStatus;

typedef enum SplatnavMethod {
  SPLATNAV_METHOD_ALL_POINTS = 0,
  SPLATNAV_METHOD_MEANS_ONLY = 1,
  SPLATNAV_METHOD_GEOMETRIC_ONLY = 2,
} SplatnavMethod;

typedef enum SplatnavOutcome {
  SPLATNAV_OUTCOME_REACHED = 0,
  SPLATNAV_OUTCOME_FROZEN = 1,
  SPLATNAV_OUTCOME_COLLIDED = 2,
  SPLATNAV_OUTCOME_TIMEOUT = 3,
} SplatnavOutcome;

// Opaque splat field.
typedef struct SplatnavField SplatnavField;

// Opaque simulated scene.
typedef struct SplatnavScene SplatnavScene;

// Pinhole intrinsics; pixel centers sit at integer coordinates.
typedef struct SplatnavCamera {
  double fx;
  double fy;
  double cx;
  double cy;
  uint32_t width;
  uint32_t height;
  double z_near;
} SplatnavCamera;

// Rigid transform, quaternion stored scalar first.
typedef struct SplatnavPose {
  double tx;
  double ty;
  double tz;
  double qw;
  double qx;
  double qy;
  double qz;
} SplatnavPose;

typedef struct SplatnavRunSummary {
  enum SplatnavOutcome outcome;
  double path_length;
  double duration;
  uint64_t map_updates;
} SplatnavRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Owned by the
// library and valid until the next failing call on the same thread.
const char *splatnav_last_error(void);

// Library version as a static NUL-terminated string.
const char *splatnav_version(void);

// Empty field holding at most `budget` primitives after pruning.
enum SplatnavStatus splatnav_field_new(size_t budget, struct SplatnavField **out);

// Reads a field dump written by `splatnav_field_save` or the CLI.
enum SplatnavStatus splatnav_field_load(const char *path, struct SplatnavField **out);

enum SplatnavStatus splatnav_field_save(const struct SplatnavField *field, const char *path);

// Frees a field handle. Null is ignored.
void splatnav_field_free(struct SplatnavField *field);

// Number of primitives, or 0 for a null handle.
size_t splatnav_field_len(const struct SplatnavField *field);

// Appends an isotropic primitive; `opacity` in (0, 1), `cost` in [0, 1].
enum SplatnavStatus splatnav_field_add(struct SplatnavField *field,
                                       double x,
                                       double y,
                                       double z,
                                       double sigma,
                                       double opacity,
                                       double cost);

// Continuous traversability cost of the field at a world point.
enum SplatnavStatus splatnav_field_query(const struct SplatnavField *field,
                                         double x,
                                         double y,
                                         double z,
                                         double *out_cost);

// Renders the cost image seen from `cam_to_world` into `out` (row-major,
// `width·height` values).
enum SplatnavStatus splatnav_render(const struct SplatnavField *field,
                                    const struct SplatnavCamera *cam,
                                    const struct SplatnavPose *cam_to_world,
                                    double background_cost,
                                    double *out,
                                    size_t out_len);

// Signed distance transform of a row-major `nx·ny` occupancy mask (nonzero =
// occupied), in meters, clamped to `±d_max`.
enum SplatnavStatus splatnav_edt_signed(const uint8_t *occupied,
                                        size_t nx,
                                        size_t ny,
                                        double resolution,
                                        double d_max,
                                        double *out);

// One of the built-in scenes, by name.
enum SplatnavStatus splatnav_scene_builtin(const char *name, struct SplatnavScene **out);

// Scene from a TOML scene file.
enum SplatnavStatus splatnav_scene_load(const char *path, struct SplatnavScene **out);

void splatnav_scene_free(struct SplatnavScene *scene);

// Runs one closed-loop episode from the scene's start to its goal with the
// default configuration, or the TOML config at `config_path` when non-null.
enum SplatnavStatus splatnav_navigate(const struct SplatnavScene *scene,
                                      enum SplatnavMethod method,
                                      uint64_t seed,
                                      const char *config_path,
                                      struct SplatnavRunSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPLATNAV_H */
