/* C interface to the backplay library.
 *
 * Every fallible call returns a bp_status; on failure a message for the
 * calling thread is available from bp_last_error() until its next call.
 * Objects are opaque and released with their *_free function. Strings
 * returned through char** are owned by the caller and released with
 * bp_string_free. */
#ifndef BACKPLAY_BACKPLAY_H
#define BACKPLAY_BACKPLAY_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(BACKPLAY_BUILDING_LIBRARY)
#define BP_API __attribute__((visibility("default")))
#else
#define BP_API
#endif

typedef enum bp_status {
  BP_OK = 0,
  BP_ERR_INVALID_ARGUMENT = 1,
  BP_ERR_INVALID_STATE = 2,
  BP_ERR_INVALID_CELL = 3,
  BP_ERR_CONFIG_INFEASIBLE = 4,
  BP_ERR_PARSE = 5,
  BP_ERR_INVARIANT = 6,
  BP_ERR_UNREACHABLE = 7,
  BP_ERR_EXHAUSTED_ATTEMPTS = 8,
  BP_ERR_EMPTY_POOL = 9,
  BP_ERR_DOMAIN = 10,
  BP_ERR_NUMERIC = 11,
  BP_ERR_NON_FINITE_LOSS = 12,
  BP_ERR_CONFIG = 13,
  BP_ERR_IO = 14,
  BP_ERR_RUN_FAILED = 15,
  BP_ERR_INTERNAL = 99
} bp_status;

typedef struct bp_maze bp_maze;
typedef struct bp_demo bp_demo;
typedef struct bp_config bp_config;
typedef struct bp_net bp_net;
typedef struct bp_records bp_records;

BP_API const char* bp_version(void);
BP_API const char* bp_last_error(void);
BP_API const char* bp_status_name(bp_status status);
BP_API void bp_string_free(char* s);

/* ---- mazes ---- */

typedef struct bp_maze_info {
  int width;
  int height;
  int start_row, start_col;
  int goal_row, goal_col;
  int wall_count;
  int shortest_path;
  uint64_t id;
} bp_maze_info;

BP_API bp_status bp_maze_generate(uint64_t seed, int width, int height, int wall_count, int min_path_len,
                                  bp_maze** out);
BP_API bp_status bp_maze_parse(const char* text, bp_maze** out);
BP_API bp_status bp_maze_load(const char* path, bp_maze** out);
BP_API bp_status bp_maze_save(const bp_maze* maze, const char* path);
BP_API bp_status bp_maze_format(const bp_maze* maze, char** out_text);
BP_API bp_status bp_maze_get_info(const bp_maze* maze, bp_maze_info* out);
BP_API void bp_maze_free(bp_maze* maze);

/* ---- demonstrations ---- */

typedef struct bp_demo_info {
  uint64_t maze_id;
  int length;
  int optimal_len;
  int gap;
} bp_demo_info;

BP_API bp_status bp_demo_shortest(const bp_maze* maze, bp_demo** out);
/* follow_probability <= 0 selects the default for the gap and maze. */
BP_API bp_status bp_demo_noisy(const bp_maze* maze, int gap, double follow_probability, uint64_t seed,
                               int max_attempts, bp_demo** out);
/* maze may be NULL; when given the demo is also replayed against it. */
BP_API bp_status bp_demo_parse(const char* text, const bp_maze* maze, bp_demo** out);
BP_API bp_status bp_demo_load(const char* path, const bp_maze* maze, bp_demo** out);
BP_API bp_status bp_demo_save(const bp_demo* demo, const char* path);
BP_API bp_status bp_demo_format(const bp_demo* demo, char** out_text);
BP_API bp_status bp_demo_get_info(const bp_demo* demo, bp_demo_info* out);
BP_API void bp_demo_free(bp_demo* demo);

/* ---- configuration ---- */

/* "desk" or "paper". */
BP_API bp_status bp_config_profile(const char* name, bp_config** out);
BP_API bp_status bp_config_parse(const char* json_text, bp_config** out);
BP_API bp_status bp_config_load(const char* path, bp_config** out);
/* Keys: seeds ("1,2,3"), regimes ("backplay,uniform"), gaps ("0,5"), epochs,
 * eval_every, checkpoint_every, parallel_runs, output_dir, mazes_dir,
 * demos_dir, maze_count, maze_seed, heldout_count, workers, batch_size,
 * minibatch_size. */
BP_API bp_status bp_config_set(bp_config* cfg, const char* key, const char* value);
/* Applies BACKPLAY_SEED when set. */
BP_API bp_status bp_config_apply_env(bp_config* cfg);
BP_API bp_status bp_config_validate(const bp_config* cfg, char** out_warnings);
BP_API bp_status bp_config_dump(const bp_config* cfg, char** out_json);
BP_API void bp_config_free(bp_config* cfg);

/* Writes maze_NNN.maze files for the configured set into dir. */
BP_API bp_status bp_generate_maze_set(const bp_config* cfg, const char* dir);
/* Writes one demo per maze in mazes_dir and configured gap into out_dir. */
BP_API bp_status bp_generate_demo_set(const bp_config* cfg, const char* mazes_dir, const char* out_dir);

/* ---- training ---- */

typedef void (*bp_progress_fn)(const char* run_label, int epoch, double success_rate, void* user);

typedef struct bp_run_info {
  char regime[16];
  int gap; /* -1 when the regime uses no demonstrations */
  uint64_t seed;
  int failed;
  double pct_optimal;
  double pct_within_5;
  double avg_subopt; /* NaN when no maze was solved */
  double std_subopt;
  double success_rate;
  int first_epoch_50;
  int epochs_recorded;
  double wall_seconds;
} bp_run_info;

/* All regime x gap x seed runs of the configuration under its output_dir. */
BP_API bp_status bp_run_experiment(const bp_config* cfg, int resume, bp_progress_fn progress, void* user,
                                   bp_records** out);
/* One run written to out_dir. gap is ignored for regimes without demos. */
BP_API bp_status bp_train(const bp_config* cfg, const char* regime, int gap, uint64_t seed, const char* out_dir,
                          int resume, bp_progress_fn progress, void* user, bp_records** out);
BP_API bp_status bp_records_load(const char* output_dir, bp_records** out);
BP_API size_t bp_records_count(const bp_records* records);
BP_API bp_status bp_records_get(const bp_records* records, size_t index, bp_run_info* out);
/* Error text of a failed run (empty otherwise); owned by records. */
BP_API const char* bp_records_error(const bp_records* records, size_t index);
BP_API bp_status bp_records_metrics_csv(const bp_records* records, size_t index, char** out_csv);
BP_API bp_status bp_records_summary(const bp_records* records, int markdown, char** out_text);
/* Learning-curve SVG; marker_epoch < 0 draws no marker. */
BP_API bp_status bp_records_plot(const bp_records* records, int marker_epoch, const char* svg_path);
BP_API void bp_records_free(bp_records* records);

/* ---- evaluation ---- */

typedef struct bp_eval_result {
  double pct_optimal;
  double pct_within_5;
  double avg_subopt;
  double std_subopt;
  double success_rate;
  int episodes;
} bp_eval_result;

BP_API bp_status bp_net_load(const char* checkpoint_path, bp_net** out);
BP_API void bp_net_free(bp_net* net);
/* Greedy rollouts from each maze's start; rows_csv may be NULL. */
BP_API bp_status bp_evaluate(const bp_net* net, const char* mazes_dir, int max_steps, bp_eval_result* out,
                             char** rows_csv);

/* ---- analysis ---- */

typedef struct bp_sweep_spec {
  const char* levels;     /* "4..14", "4..14:2" or "4,6,8" */
  double alpha;
  double beta;
  const char* strategies; /* "standard,uniform,backplay:1" */
  int runs;
  uint64_t seed;
  int trial_length_factor;
  int threads;
} bp_sweep_spec;

BP_API bp_status bp_analyze_sweep(const bp_sweep_spec* spec, char** out_csv);
/* Chain estimated from rollouts of "bfs" or "random" on the maze, with
 * first-passage times and spectral gap, as JSON. */
BP_API bp_status bp_analyze_maze(const bp_maze* maze, const char* policy, int episodes, int max_steps, uint64_t seed,
                                 char** out_json);
BP_API bp_status bp_plot_sweep(const char* csv_text, const char* svg_path);

#ifdef __cplusplus
}
#endif

#endif
