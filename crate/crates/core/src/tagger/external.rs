use serde::{Deserialize, Serialize};

use super::Tagger;
use crate::adapter::LineChannel;
use crate::corpus::{Tag, TagSequence, TokenSequence};
use crate::error::{Error, Result};
use crate::schema::ClassIndex;

#[derive(Serialize)]
struct Request<'a> {
    tokens: Vec<&'a str>,
}

#[derive(Deserialize)]
struct Response {
    tags: Vec<String>,
}

/// A tagger living in another process, spoken to over a [`LineChannel`]:
/// request `{"id", "tokens": [..]}`, response `{"id", "tags": [..]}`.
pub struct ExternalTagger {
    channel: LineChannel,
    class_index: ClassIndex,
}

impl ExternalTagger {
    pub fn new(channel: LineChannel, class_index: ClassIndex) -> Self {
        Self {
            channel,
            class_index,
        }
    }
}

impl Tagger for ExternalTagger {
    fn class_index(&self) -> &ClassIndex {
        &self.class_index
    }

    fn tag_scored(&self, tokens: &TokenSequence) -> Result<(TagSequence, Vec<f64>)> {
        let resp: Response = self.channel.call(&Request {
            tokens: tokens.texts(),
        })?;
        if resp.tags.len() != tokens.len() {
            return Err(Error::AdapterProtocol(format!(
                "sent {} tokens, got {} tags",
                tokens.len(),
                resp.tags.len()
            )));
        }
        let tags: Vec<Tag> = resp
            .tags
            .iter()
            .map(|t| {
                t.parse::<Tag>()
                    .ok()
                    .filter(|tag| self.class_index.class_of(tag).is_some())
                    .ok_or_else(|| Error::AdapterProtocol(format!("tag {t:?} is not in the schema")))
            })
            .collect::<Result<_>>()?;
        let tags = TagSequence(tags);
        if !tags.is_valid_bio() {
            return Err(Error::AdapterProtocol("tags are not valid BIO".into()));
        }
        let n = tags.len();
        Ok((tags, vec![1.0; n]))
    }
}
