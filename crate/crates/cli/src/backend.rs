use syneval::ngram::{NGramBackend, NGramModel};
use syneval::oracle::{MockBackend, OracleSpec};
use syneval::protocol::{Backend, ExecBackend, TcpBackend};
use syneval::suite::TestSuite;
use syneval::{Error, Result};

/// Open a backend from `scheme:argument`. A mock backend recognises the
/// sentences of `suite` when one is given.
pub fn open_backend(spec: &str, suite: Option<&TestSuite>) -> Result<Box<dyn Backend>> {
    let (scheme, arg) = spec.split_once(':').ok_or_else(|| {
        Error::Validation(format!(
            "backend {spec:?} is not of the form scheme:argument"
        ))
    })?;
    if arg.is_empty() {
        return Err(Error::Validation(format!(
            "backend {spec:?} has an empty argument"
        )));
    }
    Ok(match scheme {
        "ngram" => Box::new(NGramBackend::new(NGramModel::load(arg)?)),
        "mock" => {
            let rules = OracleSpec::read(arg)?;
            Box::new(match suite {
                Some(s) => MockBackend::with_suite(rules, s)?,
                None => MockBackend::new(rules)?,
            })
        }
        "exec" => Box::new(ExecBackend::spawn(arg)?),
        "tcp" => Box::new(TcpBackend::connect(arg)?),
        other => {
            return Err(Error::Validation(format!(
                "unknown backend scheme {other:?} (expected ngram, mock, exec or tcp)"
            )))
        }
    })
}
