#ifndef TERRADEEP_TERRADEEP_H
#define TERRADEEP_TERRADEEP_H

#include <stddef.h>
#include <stdint.h>

#if defined(TERRADEEP_BUILDING_LIBRARY)
#define TD_API __attribute__((visibility("default")))
#else
#define TD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct td_dataset td_dataset;
typedef struct td_model td_model;
typedef struct td_report td_report;

typedef enum td_status {
  TD_OK = 0,
  TD_ERR_ARGUMENT = 1, /* invalid parameter, configuration or learner name */
  TD_ERR_DATA = 2,     /* malformed file, inconsistent shapes or labels */
  TD_ERR_INTERNAL = 3  /* violated invariant */
} td_status;

/* Library version string, e.g. "1.0.0". */
TD_API const char* td_version(void);

/* Message of the last failed call on this thread ("" if none). */
TD_API const char* td_last_error(void);

/* Frees strings returned through char** out-parameters. */
TD_API void td_string_free(char* text);

/* ---- datasets ---------------------------------------------------------- */

TD_API td_status td_dataset_synth_slip(size_t n_per_class, size_t nw, uint64_t seed, td_dataset** out);
/* classes: comma-separated terrain names, or NULL / "" for all eight. */
TD_API td_status td_dataset_synth_terrain(const char* classes, size_t images_per_class, size_t size,
                                          uint64_t seed, td_dataset** out);
TD_API td_status td_dataset_load_sensor_csv(const char* path, td_dataset** out);
TD_API td_status td_dataset_load_image_dir(const char* path, size_t size, td_dataset** out);
/* {"task", "samples", "class_names", "dropped_rows"?, "image_size"?} */
TD_API td_status td_dataset_info_json(const td_dataset* dataset, char** out_json);
/* Slip data: sensor CSV at path. Images: <path>/<class>/<index>.pgm. */
TD_API td_status td_dataset_export(const td_dataset* dataset, const char* path);
/* Filtered features with a trailing label column: [q1..q4] per frame
   (variance window nw) or HOG descriptors per image (nw ignored). */
TD_API td_status td_dataset_write_features_csv(const td_dataset* dataset, size_t nw, const char* path);
TD_API void td_dataset_free(td_dataset* dataset);

/* ---- models ------------------------------------------------------------ */

/* config_json keys (all optional except learner):
   learner, mode ("raw" | "filtered"), nw, window_stride, epochs, batch, eta,
   seed, svm_c, svm_gamma. Trains on the whole dataset. */
TD_API td_status td_model_train(const td_dataset* dataset, const char* config_json, td_model** out);
TD_API td_status td_model_save(const td_model* model, const char* path);
TD_API td_status td_model_load(const char* path, td_model** out);
/* {"learner", "task", "input_mode", "class_names", "epoch_curve"} */
TD_API td_status td_model_info_json(const td_model* model, char** out_json);
/* Epoch curve as "epoch,accuracy" CSV (header only for SVMs). */
TD_API td_status td_model_write_curve_csv(const td_model* model, const char* path);
/* Prepares the dataset the way the model was trained and scores it. */
TD_API td_status td_model_evaluate(const td_model* model, const td_dataset* dataset, td_report** out);
TD_API void td_model_free(td_model* model);

/* ---- experiments ------------------------------------------------------- */

/* config_json: the td_model_train keys plus runs (default 10) and threads
   (default 1). When out_first_model is non-NULL it receives the model of the
   first run. */
TD_API td_status td_experiment_run(const td_dataset* dataset, const char* config_json, td_report** out_report,
                                   td_model** out_first_model);
TD_API td_status td_report_json(const td_report* report, char** out_json);
TD_API td_status td_report_accuracy(const td_report* report, double* mean, double* std_dev);
/* Returns -1 through out_epoch when the mean curve never stabilizes or the
   learner has no curve. */
TD_API td_status td_report_stable_epoch(const td_report* report, int64_t* out_epoch);
TD_API double td_report_wall_seconds(const td_report* report);
/* Writes report.json, runs.csv, confusion_run<k>.csv and, for networks,
   curve_mean.csv into directory (created if missing). */
TD_API td_status td_report_write(const td_report* report, const char* directory);
TD_API void td_report_free(td_report* report);

/* ---- catalog and verification ----------------------------------------- */

TD_API td_status td_zoo_catalog_json(char** out_json);
/* JSON array of {name, max_relative_error, threshold, checked, skipped_kinks, passed}. */
TD_API td_status td_gradcheck_run(uint64_t seed, char** out_json);

#ifdef __cplusplus
}
#endif

#endif
