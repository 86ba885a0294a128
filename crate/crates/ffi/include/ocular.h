#ifndef OCULAR_H
#define OCULAR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OcularStatus {
  OCULAR_STATUS_OK = 0,
  OCULAR_STATUS_NULL_POINTER = 1,
  OCULAR_STATUS_INVALID_ARGUMENT = 2,
  OCULAR_STATUS_BUFFER_TOO_SMALL = 3,
  OCULAR_STATUS_DECODE_ERROR = 4,
  OCULAR_STATUS_CONFIG_ERROR = 5,
  OCULAR_STATUS_SIM_ERROR = 6,
  OCULAR_STATUS_PANIC = 7,
} OcularStatus;

/**
 * Opaque simulator handle.
 */
typedef struct OcularSim OcularSim;

/**
 * Header fields of a decoded frame.
 */
typedef struct OcularPacketInfo {
  uint8_t id;
  /**
   * Instruction code, or 0x55 for a status packet.
   */
  uint8_t instruction;
  uint8_t is_status;
  /**
   * Error byte of a status packet, 0 otherwise.
   */
  uint8_t error;
  size_t params_len;
} OcularPacketInfo;

/**
 * One eye at one control tick. `u`, `v`, `ex`, `ey` are NaN without a
 * detection.
 */
typedef struct OcularEyeState {
  double t;
  double u;
  double v;
  double ex;
  double ey;
  double pan_deg;
  double tilt_deg;
  double rate_pan;
  double rate_tilt;
  uint16_t servo_h_units;
  uint16_t servo_v_units;
  uint8_t valid;
  /**
   * 0 saccade, 1 smooth pursuit, 2 fixation.
   */
  uint8_t mode;
  uint8_t vor_active;
} OcularEyeState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ocular_version(void);

/**
 * Message describing the last failure on this thread. Valid until the next
 * failing call on the same thread; empty if nothing failed yet.
 */
const char *ocular_last_error(void);

/**
 * CRC-16 (polynomial 0x8005) of `len` bytes. A null `data` with non-zero
 * `len` yields 0.
 */
uint16_t ocular_crc16(const uint8_t *data, size_t len);

/**
 * Encode an instruction frame (ping 0x01, read 0x02, write 0x03, sync write
 * 0x83) with byte stuffing and CRC.
 */
enum OcularStatus ocular_encode_instruction(uint8_t id,
                                            uint8_t instruction,
                                            const uint8_t *params,
                                            size_t params_len,
                                            uint8_t *out,
                                            size_t out_cap,
                                            size_t *out_len);

/**
 * Decode one complete frame. Parameters (after de-stuffing, without the
 * status error byte) are copied into `params_out`.
 */
enum OcularStatus ocular_decode(const uint8_t *frame,
                                size_t len,
                                struct OcularPacketInfo *info,
                                uint8_t *params_out,
                                size_t params_cap,
                                size_t *params_len);

/**
 * Servo angles (deg from neutral) for a gaze in degrees, default geometry.
 */
enum OcularStatus ocular_gaze_to_servo(double pan_deg,
                                       double tilt_deg,
                                       double *h_deg,
                                       double *v_deg);

/**
 * Inverse of [`ocular_gaze_to_servo`]; out-of-range gazes are clamped and
 * `clamped` is set to 1.
 */
enum OcularStatus ocular_servo_to_gaze(double h_deg,
                                       double v_deg,
                                       double *pan_deg,
                                       double *tilt_deg,
                                       uint8_t *clamped);

/**
 * Create a simulator for `experiment` ("saccade", "pursuit", "vergence",
 * "vor"). `config_toml` is TOML text or null for defaults.
 */
enum OcularStatus ocular_sim_new(const char *experiment,
                                 const char *config_toml,
                                 uint64_t seed,
                                 struct OcularSim **out);

/**
 * Advance one control tick. `out` receives two states, left then right,
 * describing the start of the tick.
 */
enum OcularStatus ocular_sim_step(struct OcularSim *sim, struct OcularEyeState *out);

/**
 * Simulated time of the next tick, s; NaN for a null handle.
 */
double ocular_sim_time(const struct OcularSim *sim);

/**
 * Number of ticks in the scripted experiment.
 */
uint64_t ocular_sim_total_ticks(const struct OcularSim *sim);

/**
 * Replace the scripted face position (m) from the next tick on.
 */
enum OcularStatus ocular_sim_set_target(struct OcularSim *sim, double x, double y, double z);

/**
 * Replace the scripted head pose (deg) from the next tick on.
 */
enum OcularStatus ocular_sim_set_head(struct OcularSim *sim, double yaw_deg, double pitch_deg);

/**
 * Release a simulator. Null is ignored.
 */
void ocular_sim_free(struct OcularSim *sim);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* OCULAR_H */
