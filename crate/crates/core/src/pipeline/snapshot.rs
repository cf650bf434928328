use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineState;
use crate::error::{Error, Result};

pub const SNAPSHOT_SCHEMA: &str = "prefusion-pipeline";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a> {
    schema: &'a str,
    version: u32,
    state: &'a PipelineState,
}

#[derive(Deserialize)]
struct Header {
    schema: String,
    version: u32,
}

#[derive(Deserialize)]
struct Owned {
    state: PipelineState,
}

/// Writes the full state as JSON. The file is written next to `path` and
/// renamed into place, so readers never see a half-written snapshot.
pub fn snapshot(state: &PipelineState, path: &Path) -> Result<()> {
    let json = serde_json::to_vec(&Envelope {
        schema: SNAPSHOT_SCHEMA,
        version: SNAPSHOT_VERSION,
        state,
    })?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&json)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a snapshot back. Any content that is not a valid snapshot of the
/// current schema version is reported as [`Error::SchemaVersionMismatch`].
pub fn restore(path: &Path) -> Result<PipelineState> {
    let bytes = fs::read(path)?;
    let mismatch = |what: String| Error::SchemaVersionMismatch(what);
    let header: Header =
        serde_json::from_slice(&bytes).map_err(|e| mismatch(format!("unreadable snapshot header: {e}")))?;
    if header.schema != SNAPSHOT_SCHEMA || header.version != SNAPSHOT_VERSION {
        return Err(mismatch(format!(
            "found {} v{}, expected {SNAPSHOT_SCHEMA} v{SNAPSHOT_VERSION}",
            header.schema, header.version
        )));
    }
    let Owned { mut state } =
        serde_json::from_slice(&bytes).map_err(|e| mismatch(format!("invalid snapshot body: {e}")))?;
    state
        .config
        .validate()
        .and_then(|_| state.rebuild_index())
        .map_err(|e| mismatch(format!("inconsistent snapshot: {e}")))?;
    let stubs = state.table.as_ref().map_or(0, |t| t.len());
    if state.fusion.len() != stubs {
        return Err(mismatch("fusion stubs do not match the table".into()));
    }
    Ok(state)
}
