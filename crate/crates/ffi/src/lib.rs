//! C ABI over the vpki library.
//!
//! Every fallible call returns a [`VpkiStatus`]; on failure the message is
//! available from [`vpki_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Strings handed
//! out by the library are released with [`vpki_string_free`].

use std::cell::RefCell;
use std::collections::HashMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use vpki::analyzer::{timing_link, Transcript};
use vpki::clock::ManualClock;
use vpki::crypto::{compute_pseudonym_ik, compute_ticket_ik, Digest, RandomToken, DIGEST_LEN, TOKEN_LEN};
use vpki::error::ErrorCode;
use vpki::harness::deploy::Deployment;
use vpki::model::{PolicyConfig, PolicyKind};
use vpki::vehicle::{plan_requests, RequestPlan, Vehicle};
use vpki::{Error, Result};

/// Result of every fallible call. Values 1 to 21 mirror the library's
/// error codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VpkiStatus {
    Ok = 0,
    InvalidArgument = 1,
    Decode = 2,
    Crypto = 3,
    Conflict = 4,
    Authentication = 5,
    Authorization = 6,
    SybilRejection = 7,
    Freshness = 8,
    NotFound = 9,
    WrongTarget = 10,
    Replay = 11,
    Policy = 12,
    Possession = 13,
    Arity = 14,
    TamperEvidence = 15,
    ResponseIntegrity = 16,
    PuzzleRequired = 17,
    BatchTooLarge = 18,
    Transport = 19,
    Io = 20,
    Fatal = 21,
    NullPointer = 100,
    Panic = 101,
}

impl From<ErrorCode> for VpkiStatus {
    fn from(c: ErrorCode) -> Self {
        use VpkiStatus as S;
        match c {
            ErrorCode::InvalidArgument => S::InvalidArgument,
            ErrorCode::Decode => S::Decode,
            ErrorCode::Crypto => S::Crypto,
            ErrorCode::Conflict => S::Conflict,
            ErrorCode::Authentication => S::Authentication,
            ErrorCode::Authorization => S::Authorization,
            ErrorCode::SybilRejection => S::SybilRejection,
            ErrorCode::Freshness => S::Freshness,
            ErrorCode::NotFound => S::NotFound,
            ErrorCode::WrongTarget => S::WrongTarget,
            ErrorCode::Replay => S::Replay,
            ErrorCode::Policy => S::Policy,
            ErrorCode::Possession => S::Possession,
            ErrorCode::Arity => S::Arity,
            ErrorCode::TamperEvidence => S::TamperEvidence,
            ErrorCode::ResponseIntegrity => S::ResponseIntegrity,
            ErrorCode::PuzzleRequired => S::PuzzleRequired,
            ErrorCode::BatchTooLarge => S::BatchTooLarge,
            ErrorCode::Transport => S::Transport,
            ErrorCode::Io => S::Io,
            ErrorCode::Fatal => S::Fatal,
        }
    }
}

/// Policy selector for [`vpki_plan_new`] and [`vpki_sandbox_new`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VpkiPolicy {
    P1 = 1,
    P2 = 2,
    P3 = 3,
}

impl From<VpkiPolicy> for PolicyKind {
    fn from(p: VpkiPolicy) -> Self {
        match p {
            VpkiPolicy::P1 => PolicyKind::P1,
            VpkiPolicy::P2 => PolicyKind::P2,
            VpkiPolicy::P3 => PolicyKind::P3,
        }
    }
}

/// One planned request: send at `request_time` for `[start, end)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VpkiPlanEntry {
    pub request_time: u64,
    pub start: u64,
    pub end: u64,
    pub expected_slots: usize,
}

/// Opaque request plan.
pub struct VpkiPlan {
    plan: RequestPlan,
}

/// Opaque in-process single-domain deployment driven by a manual clock.
pub struct VpkiSandbox {
    rt: tokio::runtime::Runtime,
    clock: Arc<ManualClock>,
    deployment: Deployment,
    vehicles: HashMap<String, Vehicle>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(VpkiStatus);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        set_last_error(e.to_string());
        Fail(e.code().into())
    }
}

fn null(what: &str) -> Fail {
    set_last_error(format!("{what} is null"));
    Fail(VpkiStatus::NullPointer)
}

fn guard(f: impl FnOnce() -> std::result::Result<(), Fail>) -> VpkiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VpkiStatus::Ok,
        Ok(Err(Fail(s))) => s,
        Err(_) => {
            set_last_error("panic inside vpki".into());
            VpkiStatus::Panic
        }
    }
}

unsafe fn bytes<'a>(p: *const u8, len: usize, what: &str) -> std::result::Result<&'a [u8], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> std::result::Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Error::decode(what, e.to_string()).into())
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &str) -> std::result::Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

fn policy(kind: VpkiPolicy, gamma: u64, tau: u64) -> Result<PolicyConfig> {
    PolicyConfig::new(kind.into(), gamma, tau)
}

fn token(raw: &[u8]) -> Result<RandomToken> {
    RandomToken::try_from_slice(raw)
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn vpki_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn vpki_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn vpki_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Ticket identifiable key `H(LTC || t_s || t_e || Rnd)` into `out[32]`.
/// `rnd` is 16 bytes.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn vpki_compute_ticket_ik(
    ltc: *const u8,
    ltc_len: usize,
    t_s: u64,
    t_e: u64,
    rnd: *const u8,
    out: *mut u8,
) -> VpkiStatus {
    guard(|| {
        let ltc = bytes(ltc, ltc_len, "ltc")?;
        let rnd = token(bytes(rnd, TOKEN_LEN, "rnd")?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let ik = compute_ticket_ik(ltc, t_s, t_e, &rnd)?;
        ptr::copy_nonoverlapping(ik.0.as_ptr(), out, DIGEST_LEN);
        Ok(())
    })
}

/// Pseudonym identifiable key `H(IK_tkt || K || t_s || t_e || Rnd)` into
/// `out[32]`. `ik_tkt` is 32 bytes, `rnd` 16.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn vpki_compute_pseudonym_ik(
    ik_tkt: *const u8,
    pubkey: *const u8,
    pubkey_len: usize,
    t_s: u64,
    t_e: u64,
    rnd: *const u8,
    out: *mut u8,
) -> VpkiStatus {
    guard(|| {
        let ik_tkt = Digest::try_from_slice(bytes(ik_tkt, DIGEST_LEN, "ik_tkt")?)?;
        let pubkey = bytes(pubkey, pubkey_len, "pubkey")?;
        let rnd = token(bytes(rnd, TOKEN_LEN, "rnd")?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let ik = compute_pseudonym_ik(&ik_tkt, pubkey, t_s, t_e, &rnd)?;
        ptr::copy_nonoverlapping(ik.0.as_ptr(), out, DIGEST_LEN);
        Ok(())
    })
}

/// Plans the requests of a trip `[departure, departure + duration)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vpki_plan_new(
    kind: VpkiPolicy,
    gamma: u64,
    tau: u64,
    departure: u64,
    duration: u64,
    out: *mut *mut VpkiPlan,
) -> VpkiStatus {
    guard(|| {
        let plan = plan_requests(&policy(kind, gamma, tau)?, departure, duration)?;
        write_out(out, Box::into_raw(Box::new(VpkiPlan { plan })), "out")
    })
}

/// Number of entries, 0 for null.
///
/// # Safety
/// `plan` must be null or a live plan.
#[no_mangle]
pub unsafe extern "C" fn vpki_plan_len(plan: *const VpkiPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.plan.entries.len())
}

/// Copies entry `index` into `out`.
///
/// # Safety
/// `plan` must be a live plan, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vpki_plan_entry(plan: *const VpkiPlan, index: usize, out: *mut VpkiPlanEntry) -> VpkiStatus {
    guard(|| {
        let plan = plan.as_ref().ok_or_else(|| null("plan"))?;
        let e = plan
            .plan
            .entries
            .get(index)
            .ok_or_else(|| Fail::from(Error::InvalidArgument(format!("entry {index} out of range"))))?;
        let v = VpkiPlanEntry {
            request_time: e.request_time,
            start: e.interval.start,
            end: e.interval.end,
            expected_slots: e.expected_slot_count,
        };
        write_out(out, v, "out")
    })
}

/// # Safety
/// `plan` must be null or a live plan, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vpki_plan_free(plan: *mut VpkiPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Creates a single-domain deployment whose clock starts at `t0`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vpki_sandbox_new(
    kind: VpkiPolicy,
    gamma: u64,
    tau: u64,
    t0: u64,
    out: *mut *mut VpkiSandbox,
) -> VpkiStatus {
    guard(|| {
        let cfg = policy(kind, gamma, tau)?;
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().map_err(Error::from)?;
        let clock = Arc::new(ManualClock::new(t0));
        let deployment = Deployment::single(cfg, clock.clone())?;
        let sb = VpkiSandbox { rt, clock, deployment, vehicles: HashMap::new() };
        write_out(out, Box::into_raw(Box::new(sb)), "out")
    })
}

/// # Safety
/// `sb` must be a live sandbox.
#[no_mangle]
pub unsafe extern "C" fn vpki_sandbox_set_time(sb: *mut VpkiSandbox, t: u64) -> VpkiStatus {
    guard(|| {
        sb.as_ref().ok_or_else(|| null("sb"))?.clock.set(t);
        Ok(())
    })
}

/// Runs every request of a trip for `subject`, registering it on first use.
/// The sandbox clock follows each request time. Writes the number of
/// pseudonyms obtained.
///
/// # Safety
/// `sb` must be a live sandbox, `subject` a NUL-terminated string and
/// `out_count` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vpki_sandbox_trip(
    sb: *mut VpkiSandbox,
    subject: *const c_char,
    departure: u64,
    duration: u64,
    out_count: *mut usize,
) -> VpkiStatus {
    guard(|| {
        let sb = sb.as_mut().ok_or_else(|| null("sb"))?;
        let subject = text(subject, "subject")?.to_owned();
        let VpkiSandbox { rt, clock, deployment, vehicles } = sb;
        let n = rt.block_on(async {
            if !vehicles.contains_key(&subject) {
                clock.set(departure);
                let v = deployment.vehicle(&subject, "home").await?;
                vehicles.insert(subject.clone(), v);
            }
            let v = vehicles.get_mut(&subject).expect("inserted above");
            let home = deployment.home();
            let mut n = 0;
            for e in plan_requests(v.policy(), departure, duration)?.entries {
                clock.set(e.request_time);
                n += v.acquire(&e, home.ltca.as_ref(), home.pca.as_ref()).await?.pseudonyms.len();
            }
            Ok::<_, Error>(n)
        })?;
        write_out(out_count, n, "out_count")
    })
}

/// Resolves the most recent pseudonym of `subject` through the resolution
/// authority and writes the recovered subject id (free with
/// [`vpki_string_free`]).
///
/// # Safety
/// `sb` must be a live sandbox, `subject` a NUL-terminated string and `out`
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vpki_sandbox_resolve_last(
    sb: *mut VpkiSandbox,
    subject: *const c_char,
    revoke: bool,
    out: *mut *mut c_char,
) -> VpkiStatus {
    guard(|| {
        let sb = sb.as_ref().ok_or_else(|| null("sb"))?;
        let subject = text(subject, "subject")?;
        let held = sb
            .vehicles
            .get(subject)
            .and_then(|v| v.held().last())
            .ok_or_else(|| Fail::from(Error::NotFound(format!("no pseudonym held by {subject}"))))?;
        let res = sb.rt.block_on(sb.deployment.ra.resolve(&held.pseudonym, revoke))?;
        let s = CString::new(res.ltc.subject_id.to_string()).map_err(|e| Error::decode("subject", e.to_string()))?;
        write_out(out, s.into_raw(), "out")
    })
}

/// # Safety
/// `sb` must be null or a live sandbox, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vpki_sandbox_free(sb: *mut VpkiSandbox) {
    if !sb.is_null() {
        drop(Box::from_raw(sb));
    }
}

/// Timing-only linkage over a JSON transcript; writes the JSON report (free
/// with [`vpki_string_free`]).
///
/// # Safety
/// `transcript_json` must be a NUL-terminated string, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vpki_timing_link_json(
    transcript_json: *const c_char,
    tolerance: u64,
    out: *mut *mut c_char,
) -> VpkiStatus {
    guard(|| {
        let json = text(transcript_json, "transcript_json")?;
        let mut t: Transcript = serde_json::from_str(json).map_err(|e| Error::decode("transcript", e.to_string()))?;
        t.sort();
        let report = serde_json::to_string(&timing_link(&t, tolerance)).map_err(|e| Error::Fatal(e.to_string()))?;
        let s = CString::new(report).map_err(|e| Error::decode("report", e.to_string()))?;
        write_out(out, s.into_raw(), "out")
    })
}
