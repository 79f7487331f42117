use super::{NGramModel, BOS_ID};
use crate::error::Result;
use crate::protocol::{
    whitespace_tokens, Backend, BackendInfo, BackendKind, RawResult, TokenScore,
};

/// Serves a trained model over the backend protocol. Requests are split on
/// whitespace; each token is conditioned on `order − 1` start markers plus
/// the preceding tokens of its sentence.
#[derive(Debug, Clone)]
pub struct NGramBackend {
    model: NGramModel,
    name: String,
}

impl NGramBackend {
    pub fn new(model: NGramModel) -> Self {
        let name = format!("kneser-ney-{}gram", model.order());
        Self { model, name }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn model(&self) -> &NGramModel {
        &self.model
    }

    pub fn score_sentence(&self, sentence: &str) -> RawResult {
        let m = &self.model;
        let mut history: Vec<u32> = vec![BOS_ID; m.order() - 1];
        let mut out = Vec::new();
        for (start, end, text) in whitespace_tokens(sentence) {
            let id = m.vocab().id(text);
            let p = m.prob_ids(&history, id);
            if p <= 0.0 {
                return Err(format!(
                    "token {text:?} has zero probability (closed-vocabulary model; retrain with unk_threshold >= 2)"
                ));
            }
            let s = -p.log2();
            out.push(TokenScore {
                text: text.to_string(),
                surprisal_bits: if s > 0.0 { s } else { 0.0 },
                start,
                end,
            });
            history.push(id);
        }
        Ok(out)
    }
}

impl Backend for NGramBackend {
    fn handshake(&self) -> Result<BackendInfo> {
        let m = &self.model;
        Ok(BackendInfo {
            name: self.name.clone(),
            kind: BackendKind::Ngram,
            context_window: Some((m.order() - 1) as u32),
            version: format!(
                "syneval-ngram/{} format={} vocab={} types={:?}",
                env!("CARGO_PKG_VERSION"),
                super::FORMAT_VERSION,
                m.vocab().len(),
                m.type_counts()
            ),
        })
    }

    fn score_batch(&self, sentences: &[String]) -> Result<Vec<RawResult>> {
        Ok(sentences.iter().map(|s| self.score_sentence(s)).collect())
    }
}
