//! C ABI for the clusterretri engine.
//!
//! Objects cross the boundary as opaque handles created by `*_new`, `*_load`
//! or `*_fit` functions and released with the matching `*_free`. Every
//! fallible call returns a [`CrStatus`]; on failure a message is available
//! from [`cr_last_error`] until the next failing call on the same thread.
//! Output arrays are caller-allocated and sized as documented per function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use clusterretri::binarize::{hamming_rank, itq_encode, itq_fit, load_itq, save_itq, ItqModel};
use clusterretri::features::{load_features, save_features, FeatureFormat};
use clusterretri::pipeline::{self, PipelineConfig};
use clusterretri::quantizer::{encode, load_codebook, save_codebook, CodeMatrix, Codebook};
use clusterretri::retrieval::{rank_adc, rank_exact, RankedList};
use clusterretri::{BinaryCodeMatrix, Error, FeatureMatrix};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Shape = 5,
    Numeric = 6,
    Panic = 7,
}

pub struct CrMatrix(FeatureMatrix);
pub struct CrCodebook(Codebook);
pub struct CrCodes(CodeMatrix);
pub struct CrItq(ItqModel);
pub struct CrBits(BinaryCodeMatrix);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CrStatus {
    match e {
        Error::Io { .. } => CrStatus::Io,
        Error::BadMagic { .. }
        | Error::BadVersion(_)
        | Error::BadDtype(_)
        | Error::Truncated { .. }
        | Error::TrailingData { .. }
        | Error::Parse { .. }
        | Error::RaggedRow { .. } => CrStatus::Format,
        Error::Shape(_) | Error::Empty(_) => CrStatus::Shape,
        Error::NonFinite { .. } | Error::RankDeficient { .. } | Error::Diverged { .. } => CrStatus::Numeric,
        Error::InvalidParam(_) | Error::InsufficientPairs { .. } => CrStatus::InvalidArgument,
    }
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into a status and stored message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CrStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is null"));
            CrStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            CrStatus::InvalidArgument
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            CrStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Arg("path is not valid UTF-8".into()))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Copies `rows * dims` row-major floats into a new matrix.
///
/// # Safety
/// `data` must point to `rows * dims` readable floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_matrix_new(
    rows: usize,
    dims: usize,
    data: *const f32,
    out: *mut *mut CrMatrix,
) -> CrStatus {
    guard(|| {
        let n = rows.checked_mul(dims).ok_or_else(|| Fail::Arg("rows * dims overflows".into()))?;
        let m = FeatureMatrix::new(rows, dims, slice(data, n, "data")?.to_vec())?;
        store(out, CrMatrix(m))
    })
}

/// Loads CRFT (or CSV, by `.csv` extension) features.
///
/// # Safety
/// `file` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_matrix_load(file: *const c_char, out: *mut *mut CrMatrix) -> CrStatus {
    guard(|| {
        let p = std::path::Path::new(path(file)?);
        store(out, CrMatrix(load_features(p, FeatureFormat::from_path(p))?))
    })
}

/// # Safety
/// `m` must be a live matrix handle and `file` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cr_matrix_save(m: *const CrMatrix, file: *const c_char) -> CrStatus {
    guard(|| Ok(save_features(&as_ref(m, "matrix")?.0, path(file)?)?))
}

/// # Safety
/// `m` must be a live matrix handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cr_matrix_rows(m: *const CrMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.rows())
}

/// # Safety
/// `m` must be a live matrix handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cr_matrix_dims(m: *const CrMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.dims())
}

/// Copies the row-major values into `out`, which holds `len` floats
/// (at least rows * dims).
///
/// # Safety
/// `m` must be a live matrix handle and `out` writable for `len` floats.
#[no_mangle]
pub unsafe extern "C" fn cr_matrix_copy(m: *const CrMatrix, out: *mut f32, len: usize) -> CrStatus {
    guard(|| {
        let data = as_ref(m, "matrix")?.0.as_slice();
        if len < data.len() || out.is_null() {
            return Err(Fail::Arg(format!("output buffer needs {} floats", data.len())));
        }
        ptr::copy_nonoverlapping(data.as_ptr(), out, data.len());
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cr_matrix_free(m: *mut CrMatrix) {
    free(m)
}

/// Fits `m + extra_subspaces` per-subspace K-Means codebooks with `k`
/// centroids each.
///
/// # Safety
/// `gallery` must be a live matrix handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_codebook_fit(
    gallery: *const CrMatrix,
    k: usize,
    m: usize,
    extra_subspaces: usize,
    seed: u64,
    out: *mut *mut CrCodebook,
) -> CrStatus {
    guard(|| {
        let cfg = PipelineConfig {
            k,
            m,
            extra_subspaces,
            seed,
            ..Default::default()
        };
        let cb = pipeline::build_codebook(&as_ref(gallery, "gallery")?.0, &cfg)?;
        store(out, CrCodebook(cb))
    })
}

/// # Safety
/// `file` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_codebook_load(file: *const c_char, out: *mut *mut CrCodebook) -> CrStatus {
    guard(|| store(out, CrCodebook(load_codebook(path(file)?)?)))
}

/// # Safety
/// `cb` must be a live codebook handle and `file` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cr_codebook_save(cb: *const CrCodebook, file: *const c_char) -> CrStatus {
    guard(|| Ok(save_codebook(&as_ref(cb, "codebook")?.0, path(file)?)?))
}

/// # Safety
/// `cb` must be a live codebook handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cr_codebook_k(cb: *const CrCodebook) -> usize {
    cb.as_ref().map_or(0, |c| c.0.k())
}

/// # Safety
/// `cb` must be a live codebook handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cr_codebook_subspaces(cb: *const CrCodebook) -> usize {
    cb.as_ref().map_or(0, |c| c.0.subspace_count())
}

/// # Safety
/// `cb` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cr_codebook_free(cb: *mut CrCodebook) {
    free(cb)
}

/// Nearest-centroid codes of every gallery row.
///
/// # Safety
/// `cb` and `gallery` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_codes_encode(
    cb: *const CrCodebook,
    gallery: *const CrMatrix,
    out: *mut *mut CrCodes,
) -> CrStatus {
    guard(|| {
        let codes = encode(&as_ref(cb, "codebook")?.0, &as_ref(gallery, "gallery")?.0)?;
        store(out, CrCodes(codes))
    })
}

/// # Safety
/// `codes` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cr_codes_free(codes: *mut CrCodes) {
    free(codes)
}

/// Reconstructs the gallery through the codebook and blends
/// `(1 - lambda) * reconstructed + lambda * original` into a new matrix.
///
/// # Safety
/// `gallery` and `cb` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_fuse(
    gallery: *const CrMatrix,
    cb: *const CrCodebook,
    lambda: f64,
    out: *mut *mut CrMatrix,
) -> CrStatus {
    guard(|| {
        let built = pipeline::fuse_with(&as_ref(gallery, "gallery")?.0, &as_ref(cb, "codebook")?.0, lambda)?;
        store(out, CrMatrix(built.fused.features))
    })
}

unsafe fn write_ranking(r: RankedList, order: *mut u32, distances: *mut f64, len: usize) -> Result<(), Fail> {
    if len < r.order.len() || order.is_null() {
        return Err(Fail::Arg(format!("output buffers need {} entries", r.order.len())));
    }
    ptr::copy_nonoverlapping(r.order.as_ptr(), order, r.order.len());
    if let (false, Some(d)) = (distances.is_null(), r.distances) {
        ptr::copy_nonoverlapping(d.as_ptr(), distances, d.len());
    }
    Ok(())
}

/// Ranks every gallery row by Euclidean distance to one query (ties by
/// index). `order` receives gallery indices and, if non-null, `distances`
/// the matching distances; both hold `len` ≥ gallery rows entries.
///
/// # Safety
/// `query` must hold `dims` floats, `gallery` be a live handle, and the
/// output buffers be writable for `len` entries (`distances` may be null).
#[no_mangle]
pub unsafe extern "C" fn cr_rank_exact(
    query: *const f32,
    dims: usize,
    gallery: *const CrMatrix,
    order: *mut u32,
    distances: *mut f64,
    len: usize,
) -> CrStatus {
    guard(|| {
        let r = rank_exact(slice(query, dims, "query")?, &as_ref(gallery, "gallery")?.0)?;
        write_ranking(r, order, distances, len)
    })
}

/// Lookup-table ranking of encoded gallery rows; same output contract as
/// [`cr_rank_exact`].
///
/// # Safety
/// As for [`cr_rank_exact`], with `cb` and `codes` live handles.
#[no_mangle]
pub unsafe extern "C" fn cr_rank_adc(
    query: *const f32,
    dims: usize,
    cb: *const CrCodebook,
    codes: *const CrCodes,
    order: *mut u32,
    distances: *mut f64,
    len: usize,
) -> CrStatus {
    guard(|| {
        let r = rank_adc(
            slice(query, dims, "query")?,
            &as_ref(cb, "codebook")?.0,
            &as_ref(codes, "codes")?.0,
        )?;
        write_ranking(r, order, distances, len)
    })
}

/// # Safety
/// `x` must be a live matrix handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_itq_fit(
    x: *const CrMatrix,
    bits: usize,
    iters: usize,
    seed: u64,
    out: *mut *mut CrItq,
) -> CrStatus {
    guard(|| store(out, CrItq(itq_fit(&as_ref(x, "features")?.0, bits, iters, seed)?)))
}

/// # Safety
/// `file` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_itq_load(file: *const c_char, out: *mut *mut CrItq) -> CrStatus {
    guard(|| store(out, CrItq(load_itq(path(file)?)?)))
}

/// # Safety
/// `model` must be a live handle and `file` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cr_itq_save(model: *const CrItq, file: *const c_char) -> CrStatus {
    guard(|| Ok(save_itq(&as_ref(model, "ITQ model")?.0, path(file)?)?))
}

/// # Safety
/// `model` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cr_itq_bits(model: *const CrItq) -> usize {
    model.as_ref().map_or(0, |m| m.0.bits())
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cr_itq_free(model: *mut CrItq) {
    free(model)
}

/// Binary codes of every row of `x`.
///
/// # Safety
/// `model` and `x` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_itq_encode(model: *const CrItq, x: *const CrMatrix, out: *mut *mut CrBits) -> CrStatus {
    guard(|| {
        let codes = itq_encode(&as_ref(model, "ITQ model")?.0, &as_ref(x, "features")?.0)?;
        store(out, CrBits(codes))
    })
}

/// Number of u64 words per code row (bits rounded up to 64).
///
/// # Safety
/// `codes` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cr_bits_words_per_row(codes: *const CrBits) -> usize {
    codes.as_ref().map_or(0, |c| BinaryCodeMatrix::words_for(c.0.bits()))
}

/// Copies the packed words (LSB-first, row-major) into `out` of `len` words.
///
/// # Safety
/// `codes` must be a live handle and `out` writable for `len` words.
#[no_mangle]
pub unsafe extern "C" fn cr_bits_copy(codes: *const CrBits, out: *mut u64, len: usize) -> CrStatus {
    guard(|| {
        let words = as_ref(codes, "codes")?.0.as_words();
        if len < words.len() || out.is_null() {
            return Err(Fail::Arg(format!("output buffer needs {} words", words.len())));
        }
        ptr::copy_nonoverlapping(words.as_ptr(), out, words.len());
        Ok(())
    })
}

/// Ranks `gallery` codes by Hamming distance to row `query_row` of
/// `queries`. `distances` (may be null) receives bit counts as doubles.
///
/// # Safety
/// Handles must be live; output buffers writable for `len` entries.
#[no_mangle]
pub unsafe extern "C" fn cr_rank_hamming(
    queries: *const CrBits,
    query_row: usize,
    gallery: *const CrBits,
    order: *mut u32,
    distances: *mut f64,
    len: usize,
) -> CrStatus {
    guard(|| {
        let q = &as_ref(queries, "query codes")?.0;
        if query_row >= q.rows() {
            return Err(Fail::Arg(format!("query row {query_row} out of range for {} rows", q.rows())));
        }
        let r = hamming_rank(q, query_row, &as_ref(gallery, "gallery codes")?.0)?;
        write_ranking(r, order, distances, len)
    })
}

/// # Safety
/// `codes` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cr_bits_free(codes: *mut CrBits) {
    free(codes)
}
