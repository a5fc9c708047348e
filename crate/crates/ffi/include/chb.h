#ifndef CHB_H
#define CHB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Number of Fourier amplitudes in [`ChbDiagnostics`].
#define CHB_NUM_MODES 13

// Result code of every fallible call.
typedef enum {
  CHB_STATUS_OK = 0,
  CHB_STATUS_NULL_POINTER = 1,
  CHB_STATUS_INVALID_ARGUMENT = 2,
  CHB_STATUS_CONFIG = 3,
  CHB_STATUS_SOLVER = 4,
  CHB_STATUS_IO = 5,
  CHB_STATUS_PANIC = 6,
} ChbStatus;

// Nodal field selector for `chb_simulation_copy_field`.
typedef enum {
  CHB_FIELD_PHI = 0,
  CHB_FIELD_MU = 1,
  CHB_FIELD_SIGMA = 2,
  CHB_FIELD_PRESSURE = 3,
} ChbField;

// Opaque simulation handle.
typedef struct ChbSimulation ChbSimulation;

// Scalar diagnostics of the current state.
typedef struct {
  double t;
  double mass;
  double tumour_area;
  double energy;
  double phi_min;
  double phi_max;
  double sigma_min;
  double sigma_max;
  double v_max;
  double mean_radius;
  double modes[CHB_NUM_MODES];
  size_t flow_iters;
  size_t vi_iters;
  size_t nutrient_iters;
} ChbDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none failed.
// The pointer stays valid until the next failing call on the same thread.
const char *chb_last_error_message(void);

// Creates a simulation with the desk-scale default parameters.
//
// # Safety
// `out` must be null or point to writable storage for one pointer.
ChbStatus chb_simulation_new(ChbSimulation **out);

// Creates a simulation from a TOML configuration text.
//
// # Safety
// `toml` must be null or a NUL-terminated string; `out` must be null or
// point to writable storage for one pointer.
ChbStatus chb_simulation_from_toml(const char *toml, ChbSimulation **out);

// Releases a simulation. Null is ignored.
//
// # Safety
// `sim` must be null or a handle from this library that has not been freed.
void chb_simulation_free(ChbSimulation *sim);

// Advances by `steps` time steps, stopping at the first failure. The state
// is that of the last successful step.
//
// # Safety
// `sim` must be null or a live handle not used concurrently.
ChbStatus chb_simulation_advance(ChbSimulation *sim, size_t steps);

// Current simulation time.
//
// # Safety
// `sim` must be null or a live handle; `t` must be null or writable.
ChbStatus chb_simulation_time(const ChbSimulation *sim, double *t);

// Number of mesh vertices, i.e. the length of every nodal field.
//
// # Safety
// `sim` must be null or a live handle; `n` must be null or writable.
ChbStatus chb_simulation_num_vertices(const ChbSimulation *sim, size_t *n);

// Copies the vertex coordinates as interleaved `x, y` pairs into `buf`,
// which must hold exactly `2 * num_vertices` values.
//
// # Safety
// `sim` must be null or a live handle; `buf` must be null or point to `len`
// writable doubles.
ChbStatus chb_simulation_copy_vertices(const ChbSimulation *sim, double *buf, size_t len);

// Copies a nodal field into `buf`, which must hold exactly `num_vertices`
// values.
//
// # Safety
// `sim` must be null or a live handle; `buf` must be null or point to `len`
// writable doubles.
ChbStatus chb_simulation_copy_field(const ChbSimulation *sim,
                                    ChbField field,
                                    double *buf,
                                    size_t len);

// Diagnostics of the current state.
//
// # Safety
// `sim` must be null or a live handle; `out` must be null or writable.
ChbStatus chb_simulation_diagnostics(const ChbSimulation *sim, ChbDiagnostics *out);

// Writes the current fields as a legacy VTK file.
//
// # Safety
// `sim` must be null or a live handle; `path` must be null or a
// NUL-terminated string.
ChbStatus chb_simulation_write_vtk(const ChbSimulation *sim, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHB_H */
