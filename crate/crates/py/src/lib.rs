//! Python bindings: a `Repository` class whose methods mirror the tool
//! protocol ops and return plain dicts/lists.

use std::path::PathBuf;
use std::sync::Arc;

use gcc_core::clock::{parse_timestamp, ManualClock};
use gcc_core::command::{Command, ContextQuery, Session};
use gcc_core::GccError;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde_json::{json, Value};

create_exception!(gcc_py, GccException, PyException, "Raised with (code, message) for every GCC error.");

fn to_py_err(e: GccError) -> PyErr {
    GccException::new_err((e.code().as_str(), e.to_string()))
}

fn to_python(py: Python<'_>, value: &Value) -> PyResult<Py<PyAny>> {
    let json = py.import("json")?;
    Ok(json.call_method1("loads", (value.to_string(),))?.unbind())
}

fn from_python(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    let json = obj.py().import("json")?;
    let text: String = json.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyclass(name = "Repository", module = "gcc_py")]
struct PyRepository {
    root: PathBuf,
    clock: Option<Arc<ManualClock>>,
}

impl PyRepository {
    fn session(&self) -> Session {
        let session = Session::new(&self.root);
        match &self.clock {
            Some(clock) => session.with_clock(clock.clone()),
            None => session,
        }
    }

    fn run(&self, py: Python<'_>, command: Command) -> PyResult<Py<PyAny>> {
        let outcome = self.session().execute(&command).map_err(to_py_err)?;
        to_python(py, &outcome.to_json())
    }
}

#[pymethods]
impl PyRepository {
    /// Creates `.GCC/` under `root`.
    #[staticmethod]
    #[pyo3(signature = (root, goal, todo = Vec::new()))]
    fn init(root: PathBuf, goal: String, todo: Vec<String>) -> PyResult<Self> {
        gcc_core::Repository::init(&root, &goal, &todo).map_err(to_py_err)?;
        Ok(Self { root, clock: None })
    }

    #[staticmethod]
    fn open(root: PathBuf) -> PyResult<Self> {
        gcc_core::Repository::open(&root).map_err(to_py_err)?;
        Ok(Self { root, clock: None })
    }

    /// Pins the clock to an RFC 3339 timestamp; `None` restores the system clock.
    #[pyo3(signature = (timestamp = None))]
    fn set_clock(&mut self, timestamp: Option<&str>) -> PyResult<()> {
        self.clock = match timestamp {
            Some(t) => {
                let at = parse_timestamp(t).ok_or_else(|| PyValueError::new_err(format!("bad timestamp {t:?}")))?;
                match &self.clock {
                    Some(clock) => {
                        clock.set(at);
                        Some(clock.clone())
                    }
                    None => Some(Arc::new(ManualClock::new(at))),
                }
            }
            None => None,
        };
        Ok(())
    }

    #[getter]
    fn root(&self) -> PathBuf {
        self.root.clone()
    }

    fn head(&self) -> PyResult<String> {
        self.session().open().and_then(|r| r.head()).map_err(to_py_err)
    }

    fn branches(&self) -> PyResult<Vec<String>> {
        self.session().open().and_then(|r| r.branches()).map_err(to_py_err)
    }

    /// Runs any tool-protocol op with a dict of arguments.
    #[pyo3(signature = (op, args = None))]
    fn request(&self, py: Python<'_>, op: &str, args: Option<&Bound<'_, PyDict>>) -> PyResult<Py<PyAny>> {
        let args = match args {
            Some(a) => from_python(a.as_any())?,
            None => Value::Null,
        };
        let command = Command::from_json(op, args).map_err(to_py_err)?;
        self.run(py, command)
    }

    #[pyo3(signature = (observation = "", thought = "", action = ""))]
    fn ota(&self, py: Python<'_>, observation: &str, thought: &str, action: &str) -> PyResult<Py<PyAny>> {
        self.run(
            py,
            Command::Ota {
                observation: observation.to_owned(),
                thought: thought.to_owned(),
                action: action.to_owned(),
            },
        )
    }

    #[pyo3(signature = (message, contribution = "", metadata = None))]
    fn commit(&self, py: Python<'_>, message: &str, contribution: &str, metadata: Option<&Bound<'_, PyDict>>) -> PyResult<Py<PyAny>> {
        let mut args = json!({"message": message, "contribution": contribution});
        if let Some(m) = metadata {
            args["metadata"] = from_python(m.as_any())?;
        }
        self.run(py, Command::from_json("commit", args).map_err(to_py_err)?)
    }

    #[pyo3(signature = (name, purpose = ""))]
    fn branch(&self, py: Python<'_>, name: &str, purpose: &str) -> PyResult<Py<PyAny>> {
        self.run(
            py,
            Command::Branch {
                name: name.to_owned(),
                purpose: purpose.to_owned(),
            },
        )
    }

    fn checkout(&self, py: Python<'_>, name: &str) -> PyResult<Py<PyAny>> {
        self.run(py, Command::Checkout { name: name.to_owned() })
    }

    #[pyo3(signature = (target, synthesis = "", purpose = None))]
    fn merge(&self, py: Python<'_>, target: &str, synthesis: &str, purpose: Option<&str>) -> PyResult<Py<PyAny>> {
        let args = json!({"target": target, "synthesis": synthesis, "purpose": purpose});
        self.run(py, Command::from_json("merge", args).map_err(to_py_err)?)
    }

    #[pyo3(signature = (branch = None, commit = None, log = false, metadata = None))]
    fn context(
        &self,
        py: Python<'_>,
        branch: Option<String>,
        commit: Option<String>,
        log: bool,
        metadata: Option<String>,
    ) -> PyResult<Py<PyAny>> {
        let query = ContextQuery::resolve(branch, commit, log, metadata).map_err(to_py_err)?;
        self.run(py, Command::Context(query))
    }

    fn scroll(&self, py: Python<'_>, cursor: &str, direction: &str) -> PyResult<Py<PyAny>> {
        let args = json!({"cursor": cursor, "direction": direction});
        self.run(py, Command::from_json("scroll", args).map_err(to_py_err)?)
    }

    fn checkpoints(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        self.run(py, Command::Checkpoints)
    }

    fn set_metadata(&self, py: Python<'_>, segment: &str, tree: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
        let args = json!({"segment": segment, "tree": from_python(tree)?});
        self.run(py, Command::from_json("set_metadata", args).map_err(to_py_err)?)
    }

    fn __repr__(&self) -> String {
        format!("Repository({:?})", self.root.display().to_string())
    }
}

/// Adds the module contents to `m`; also used to embed the bindings.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRepository>()?;
    m.add("GccError", m.py().get_type::<GccException>())?;
    Ok(())
}

#[pymodule]
fn gcc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
