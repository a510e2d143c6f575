use std::fs;
use std::path::{Path, PathBuf};

use super::{
    estimate_cost, estimate_messages_tokens, estimate_tokens, ChatMessage, CompletionResult, GenerationParams,
    PriceTable, Provider, ProviderConfig, ProviderError, ProviderErrorKind,
};

/// `response_*.txt` files of a script directory, in lexicographic order.
pub fn script_files(dir: &Path) -> Result<Vec<PathBuf>, ProviderError> {
    let entries = fs::read_dir(dir).map_err(|e| {
        ProviderError::new(
            ProviderErrorKind::Config,
            format!("cannot read script dir {}: {e}", dir.display()),
        )
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("response_") && n.ends_with(".txt"))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Response `call_index` (1-based) of a script directory.
pub fn scripted_complete(
    script_dir: &Path,
    call_index: usize,
    messages: &[ChatMessage],
    prices: PriceTable,
) -> Result<CompletionResult, ProviderError> {
    let files = script_files(script_dir)?;
    complete_from(&files, call_index, messages, prices)
}

fn complete_from(
    files: &[PathBuf],
    call_index: usize,
    messages: &[ChatMessage],
    prices: PriceTable,
) -> Result<CompletionResult, ProviderError> {
    let Some(path) = call_index.checked_sub(1).and_then(|i| files.get(i)) else {
        return Err(ProviderError::new(
            ProviderErrorKind::ScriptExhausted,
            format!("call {call_index} but the script has {} responses", files.len()),
        ));
    };
    let text = fs::read_to_string(path).map_err(|e| {
        ProviderError::new(
            ProviderErrorKind::Config,
            format!("cannot read {}: {e}", path.display()),
        )
    })?;
    let tokens_in = estimate_messages_tokens(messages);
    let tokens_out = estimate_tokens(&text);
    Ok(CompletionResult {
        text,
        tokens_in,
        tokens_out,
        cost_usd: estimate_cost(tokens_in, tokens_out, prices),
        latency_seconds: 0.0,
        estimated: true,
    })
}

/// Replays canned responses; the file list is fixed at construction.
pub struct ScriptedProvider {
    files: Vec<PathBuf>,
    calls: usize,
    prices: PriceTable,
}

impl ScriptedProvider {
    pub fn new(config: &ProviderConfig) -> Result<Self, ProviderError> {
        let dir = config
            .script_dir
            .as_deref()
            .ok_or_else(|| ProviderError::new(ProviderErrorKind::Config, "scripted provider needs `script_dir`"))?;
        Ok(ScriptedProvider {
            files: script_files(dir)?,
            calls: 0,
            prices: config.price_table,
        })
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn calls(&self) -> usize {
        self.calls
    }
}

impl Provider for ScriptedProvider {
    fn complete(
        &mut self,
        messages: &[ChatMessage],
        _params: &GenerationParams,
    ) -> Result<CompletionResult, ProviderError> {
        let result = complete_from(&self.files, self.calls + 1, messages, self.prices)?;
        self.calls += 1;
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::Role;

    fn script(texts: &[&str]) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (i, t) in texts.iter().enumerate() {
            fs::write(dir.path().join(format!("response_{:03}.txt", i + 1)), t).unwrap();
        }
        fs::write(dir.path().join("notes.md"), "ignored").unwrap();
        dir
    }

    #[test]
    fn replays_in_order_then_exhausts() {
        let dir = script(&["one", "two", "three"]);
        let mut p = ScriptedProvider::new(&ProviderConfig::scripted(dir.path())).unwrap();
        let msgs = [ChatMessage::new(Role::User, "12345678")];
        let texts: Vec<String> = (0..3)
            .map(|_| p.complete(&msgs, &GenerationParams::default()).unwrap().text)
            .collect();
        assert_eq!(texts, ["one", "two", "three"]);
        let err = p.complete(&msgs, &GenerationParams::default()).unwrap_err();
        assert_eq!(err.kind, ProviderErrorKind::ScriptExhausted);
        assert_eq!(p.calls(), 3);
    }

    #[test]
    fn tokens_and_cost() {
        let dir = script(&["abcdefghi"]);
        let msgs = [
            ChatMessage::new(Role::System, "abcd"),
            ChatMessage::new(Role::User, "abcde"),
        ];
        let r = scripted_complete(dir.path(), 1, &msgs, PriceTable::new(3.0, 15.0)).unwrap();
        assert_eq!((r.tokens_in, r.tokens_out), (3, 3));
        assert!((r.cost_usd - (3.0 * 3.0 + 3.0 * 15.0) / 1e6).abs() < 1e-15);
        assert_eq!(r.latency_seconds, 0.0);
        assert!(r.estimated);
    }

    #[test]
    fn replay_is_deterministic() {
        let dir = script(&["a", "b"]);
        let run = || {
            let mut p = ScriptedProvider::new(&ProviderConfig::scripted(dir.path())).unwrap();
            (0..2)
                .map(|_| p.complete(&[], &GenerationParams::default()).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn call_zero_and_beyond() {
        let dir = script(&["a"]);
        assert_eq!(
            scripted_complete(dir.path(), 0, &[], PriceTable::default())
                .unwrap_err()
                .kind,
            ProviderErrorKind::ScriptExhausted
        );
        assert_eq!(
            scripted_complete(dir.path(), 2, &[], PriceTable::default())
                .unwrap_err()
                .kind,
            ProviderErrorKind::ScriptExhausted
        );
    }
}
