//! C ABI over the `hivae` crate.
//!
//! Datasets and models cross the boundary as opaque handles owned by the
//! caller and released with the matching `*_free` function. Every function
//! returns a [`HivaeStatus`]; on failure the message is available from
//! [`hivae_last_error_message`] on the same thread. Panics are caught and
//! reported as [`HivaeStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use hivae::benchmark::{evaluate, generate_mcar_mask, synthetic, BenchmarkError};
use hivae::imputation::{impute_map, impute_sample, ImputationError, ImputationResult};
use hivae::tabular::{load_dataset, write_csv, HeterogeneousTable, MissingMask, TabularError};
use hivae::training::{
    load_model, save_model, train, EncoderMode, ModelFileError, ModelState, TrainConfig, TrainError,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Result code of every exported function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HivaeStatus {
    Ok = 0,
    /// A null pointer, bad UTF-8 path, out-of-range index or invalid configuration.
    InvalidArgument = 1,
    /// Malformed data, mask, types or model file, or a schema mismatch.
    DataError = 2,
    /// Training produced a non-finite loss.
    NumericalFailure = 3,
    IoError = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

/// A table together with its observed-cell mask.
pub struct HivaeDataset {
    table: HeterogeneousTable,
    mask: MissingMask,
}

/// A trained model with its inference statistics.
pub struct HivaeModel {
    state: ModelState,
}

/// Training settings. Obtain defaults from [`hivae_train_config_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct HivaeTrainConfig {
    pub dim_z: usize,
    pub dim_s: usize,
    pub dim_y: usize,
    pub layers: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub tau_start: f64,
    pub tau_end: f64,
    pub seed: u64,
    pub factorized: bool,
    pub normalization: bool,
}

impl From<&HivaeTrainConfig> for TrainConfig {
    fn from(c: &HivaeTrainConfig) -> Self {
        TrainConfig {
            dim_z: c.dim_z,
            dim_s: c.dim_s,
            dim_y: c.dim_y,
            layers: c.layers,
            hidden: c.hidden,
            epochs: c.epochs,
            batch_size: c.batch_size,
            tau_start: c.tau_start,
            tau_end: c.tau_end,
            seed: c.seed,
            encoder: if c.factorized { EncoderMode::Factorized } else { EncoderMode::InputDropout },
            normalization: c.normalization,
            ..TrainConfig::default()
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(HivaeStatus, String);

impl From<TabularError> for Failure {
    fn from(e: TabularError) -> Self {
        let status = match e {
            TabularError::Io { .. } => HivaeStatus::IoError,
            _ => HivaeStatus::DataError,
        };
        Failure(status, e.to_string())
    }
}

impl From<ModelFileError> for Failure {
    fn from(e: ModelFileError) -> Self {
        let status = match e {
            ModelFileError::Io(_) => HivaeStatus::IoError,
            _ => HivaeStatus::DataError,
        };
        Failure(status, e.to_string())
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        let status = match e {
            TrainError::InvalidConfig(_) => HivaeStatus::InvalidArgument,
            TrainError::EmptyTable => HivaeStatus::DataError,
            TrainError::NonFinite { .. } | TrainError::Compute(_) => HivaeStatus::NumericalFailure,
        };
        Failure(status, e.to_string())
    }
}

impl From<ImputationError> for Failure {
    fn from(e: ImputationError) -> Self {
        match e {
            ImputationError::Train(t) => t.into(),
            ImputationError::Compute(_) => Failure(HivaeStatus::NumericalFailure, e.to_string()),
            _ => Failure(HivaeStatus::DataError, e.to_string()),
        }
    }
}

impl From<BenchmarkError> for Failure {
    fn from(e: BenchmarkError) -> Self {
        match e {
            BenchmarkError::Imputation(i) => i.into(),
            BenchmarkError::Fraction(_) => Failure(HivaeStatus::InvalidArgument, e.to_string()),
            _ => Failure(HivaeStatus::DataError, e.to_string()),
        }
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(HivaeStatus::InvalidArgument, msg.to_string())
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> HivaeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HivaeStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(&format!("panic: {msg}"));
            HivaeStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map(PathBuf::from).map_err(|_| invalid(&format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| invalid(&format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| invalid(&format!("{what} is null")))
}

fn completed(res: ImputationResult) -> *mut HivaeDataset {
    let mask = MissingMask::all_observed(res.completed.rows(), res.completed.cols());
    Box::into_raw(Box::new(HivaeDataset { table: res.completed, mask }))
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn hivae_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Defaults: K = 10, L = 10, 5 units per attribute, one layer, 2000 epochs,
/// batches of 1000, τ from 1 to 0.001, normalization on.
#[no_mangle]
pub extern "C" fn hivae_train_config_default() -> HivaeTrainConfig {
    let d = TrainConfig::default();
    HivaeTrainConfig {
        dim_z: d.dim_z,
        dim_s: d.dim_s,
        dim_y: d.dim_y,
        layers: d.layers,
        hidden: d.hidden,
        epochs: d.epochs,
        batch_size: d.batch_size,
        tau_start: d.tau_start,
        tau_end: d.tau_end,
        seed: d.seed,
        factorized: false,
        normalization: d.normalization,
    }
}

/// Loads a CSV dataset. `mask_path` may be null, in which case empty cells are missing.
///
/// # Safety
/// Path arguments must be null or nul-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hivae_dataset_load(
    data_path: *const c_char,
    types_path: *const c_char,
    mask_path: *const c_char,
    out: *mut *mut HivaeDataset,
) -> HivaeStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let data = path_arg(data_path, "data_path")?;
        let types = path_arg(types_path, "types_path")?;
        let mask = if mask_path.is_null() { None } else { Some(path_arg(mask_path, "mask_path")?) };
        let (table, mask) = load_dataset(&data, &types, mask.as_deref())?;
        *out = Box::into_raw(Box::new(HivaeDataset { table, mask }));
        Ok(())
    })
}

/// The built-in seven-column correlated dataset, fully observed.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hivae_dataset_synthetic(rows: usize, seed: u64, out: *mut *mut HivaeDataset) -> HivaeStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if rows == 0 {
            return Err(invalid("rows must be positive"));
        }
        let (table, mask) = synthetic::correlated_dataset(rows, seed);
        *out = Box::into_raw(Box::new(HivaeDataset { table, mask }));
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hivae_dataset_rows(dataset: *const HivaeDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.table.rows())
}

/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hivae_dataset_cols(dataset: *const HivaeDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.table.cols())
}

/// Reads one cell. `value` is unspecified when `observed` is false.
///
/// # Safety
/// `dataset` must be a live handle; `value` and `observed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hivae_dataset_get(
    dataset: *const HivaeDataset,
    row: usize,
    col: usize,
    value: *mut f64,
    observed: *mut bool,
) -> HivaeStatus {
    guard(|| {
        let d = handle(dataset, "dataset")?;
        let value = out_ptr(value, "value")?;
        let observed = out_ptr(observed, "observed")?;
        if row >= d.table.rows() || col >= d.table.cols() {
            return Err(invalid("cell index out of range"));
        }
        *value = d.table.get(row, col);
        *observed = d.mask.is_observed(row, col);
        Ok(())
    })
}

/// Copies `dataset` and hides each observed cell of the copy with probability `fraction`.
///
/// # Safety
/// `dataset` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hivae_dataset_mcar(
    dataset: *const HivaeDataset,
    fraction: f64,
    seed: u64,
    out: *mut *mut HivaeDataset,
) -> HivaeStatus {
    guard(|| {
        let d = handle(dataset, "dataset")?;
        let out = out_ptr(out, "out")?;
        let mask = generate_mcar_mask(&d.table, fraction, seed)?.intersect(&d.mask);
        *out = Box::into_raw(Box::new(HivaeDataset { table: d.table.clone(), mask }));
        Ok(())
    })
}

/// Writes the dataset as CSV with missing cells left empty.
///
/// # Safety
/// `dataset` must be a live handle; `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hivae_dataset_write_csv(dataset: *const HivaeDataset, path: *const c_char) -> HivaeStatus {
    guard(|| {
        let d = handle(dataset, "dataset")?;
        let path = path_arg(path, "path")?;
        let mut buf = Vec::new();
        write_csv(&mut buf, &d.table, Some(&d.mask)).expect("writing to memory");
        std::fs::write(&path, buf).map_err(|e| Failure(HivaeStatus::IoError, format!("{}: {e}", path.display())))
    })
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hivae_dataset_free(dataset: *mut HivaeDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Trains on the observed cells of `dataset`.
///
/// # Safety
/// `dataset` and `config` must be valid pointers; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hivae_model_train(
    dataset: *const HivaeDataset,
    config: *const HivaeTrainConfig,
    out: *mut *mut HivaeModel,
) -> HivaeStatus {
    guard(|| {
        let d = handle(dataset, "dataset")?;
        let config = TrainConfig::from(handle(config, "config")?);
        let out = out_ptr(out, "out")?;
        let state = train(&d.table, &d.mask, &config)?;
        *out = Box::into_raw(Box::new(HivaeModel { state }));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hivae_model_save(model: *const HivaeModel, path: *const c_char) -> HivaeStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let path = path_arg(path, "path")?;
        save_model(&m.state, path)?;
        Ok(())
    })
}

/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hivae_model_load(path: *const c_char, out: *mut *mut HivaeModel) -> HivaeStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let out = out_ptr(out, "out")?;
        let state = load_model(path)?;
        *out = Box::into_raw(Box::new(HivaeModel { state }));
        Ok(())
    })
}

/// Fills every missing cell with the mode of its decoded distribution at the
/// MAP latent. The result is a new, fully observed dataset.
///
/// # Safety
/// `model` and `dataset` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hivae_model_impute_map(
    model: *const HivaeModel,
    dataset: *const HivaeDataset,
    out: *mut *mut HivaeDataset,
) -> HivaeStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let d = handle(dataset, "dataset")?;
        let out = out_ptr(out, "out")?;
        *out = completed(impute_map(&m.state, &d.table, &d.mask)?);
        Ok(())
    })
}

/// Fills every missing cell with one posterior-predictive draw.
///
/// # Safety
/// `model` and `dataset` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hivae_model_impute_sample(
    model: *const HivaeModel,
    dataset: *const HivaeDataset,
    seed: u64,
    out: *mut *mut HivaeDataset,
) -> HivaeStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let d = handle(dataset, "dataset")?;
        let out = out_ptr(out, "out")?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        *out = completed(impute_sample(&m.state, &d.table, &d.mask, &mut rng)?);
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hivae_model_free(model: *mut HivaeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// AvgErr of `imputed` on the cells observed in `truth` but missing in `masked`.
///
/// # Safety
/// All handles must be live and share one schema; `avg_err` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hivae_evaluate(
    truth: *const HivaeDataset,
    masked: *const HivaeDataset,
    imputed: *const HivaeDataset,
    avg_err: *mut f64,
) -> HivaeStatus {
    guard(|| {
        let t = handle(truth, "truth")?;
        let m = handle(masked, "masked")?;
        let i = handle(imputed, "imputed")?;
        let avg_err = out_ptr(avg_err, "avg_err")?;
        if m.table.schema() != t.table.schema() {
            return Err(Failure(HivaeStatus::DataError, "masked dataset has a different schema".into()));
        }
        let report = evaluate(&t.table, &i.table, &t.mask, &m.mask, "ffi", 0.0, 0, 0)?;
        *avg_err = report.avg_err;
        Ok(())
    })
}
