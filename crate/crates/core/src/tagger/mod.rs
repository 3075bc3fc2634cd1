//! Statistical sequence tagger over the merged label set.

mod external;
mod features;
mod model;
mod optim;
mod train;

pub use external::ExternalTagger;
pub use features::{extract_features, word_shape, FeatureHasher, FeatureVector, BOS, EOS, TEMPLATES};
pub use model::{argmax, softmax, TaggerModel};
pub use optim::{adam_step, loss, loss_and_grad, loss_and_grad_weighted, AdamState, SparseGrad};
pub use train::{compressed_gold, dev_f1, split_dev, train, train_from, EpochStats, TrainConfig, TrainStats};

use crate::corpus::{bio_to_spans, EntitySpan, Source, TagSequence, TokenSequence};
use crate::error::Result;
use crate::schema::{ClassIndex, LabelSchema};

/// Anything that labels tokens with BIO tags over a [`ClassIndex`].
pub trait Tagger: Send + Sync {
    fn class_index(&self) -> &ClassIndex;

    /// Tags plus a per-token confidence in `[0, 1]`.
    fn tag_scored(&self, tokens: &TokenSequence) -> Result<(TagSequence, Vec<f64>)>;

    fn tag(&self, tokens: &TokenSequence) -> Result<TagSequence> {
        Ok(self.tag_scored(tokens)?.0)
    }

    /// Spans sourced MODEL; confidence is the lowest token confidence inside.
    fn tag_spans(&self, tokens: &TokenSequence) -> Result<Vec<EntitySpan>> {
        let (tags, conf) = self.tag_scored(tokens)?;
        Ok(bio_to_spans(&tags)
            .into_iter()
            .map(|s| {
                let c = conf[s.start..s.end].iter().copied().fold(1.0, f64::min);
                s.with_source(Source::Model).with_confidence(c)
            })
            .collect())
    }

    fn check_schema(&self, schema: &LabelSchema) -> Result<()> {
        let want = schema.class_index();
        if &want != self.class_index() {
            return Err(crate::Error::SchemaMismatch {
                expected: format!("{} {:?}", want.schema_version, want.labels),
                found: format!("{} {:?}", self.class_index().schema_version, self.class_index().labels),
            });
        }
        Ok(())
    }
}

impl Tagger for TaggerModel {
    fn class_index(&self) -> &ClassIndex {
        &self.class_index
    }

    fn tag_scored(&self, tokens: &TokenSequence) -> Result<(TagSequence, Vec<f64>)> {
        Ok(TaggerModel::tag_scored(self, tokens))
    }
}

/// Tags `tokens` after checking the model was trained for `schema`.
pub fn tag(model: &dyn Tagger, schema: &LabelSchema, tokens: &TokenSequence) -> Result<TagSequence> {
    model.check_schema(schema)?;
    model.tag(tokens)
}
