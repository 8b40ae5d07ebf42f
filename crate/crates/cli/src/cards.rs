use std::collections::BTreeMap;
use std::path::Path;

use ed_predict::ModelCard;

use crate::CliError;

/// Environment variable naming a directory of extra or replacement cards.
pub const CARDS_ENV: &str = "ED_PREDICT_CARDS";

/// Model cards by name. Immutable once loaded.
#[derive(Debug, Clone)]
pub struct CardStore {
    cards: BTreeMap<String, ModelCard>,
}

impl CardStore {
    pub fn bundled() -> CardStore {
        CardStore { cards: ModelCard::bundled().into_iter().map(|c| (c.name.clone(), c)).collect() }
    }

    /// Bundled cards plus every `*.json` card in `dir`; a card in `dir`
    /// replaces a bundled one of the same name. Any unreadable card fails.
    pub fn with_dir(dir: &Path) -> Result<CardStore, CliError> {
        let mut store = CardStore::bundled();
        let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir.display(), e))?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let card = ModelCard::load(&path)?;
            store.cards.insert(card.name.clone(), card);
        }
        Ok(store)
    }

    /// `with_dir` when a directory is given, otherwise the bundled cards.
    pub fn load(dir: Option<&Path>) -> Result<CardStore, CliError> {
        match dir {
            Some(d) => CardStore::with_dir(d),
            None => Ok(CardStore::bundled()),
        }
    }

    pub fn get(&self, name: &str) -> Option<&ModelCard> {
        self.cards.get(name)
    }

    /// A card by name, or loaded from `name` as a path.
    pub fn resolve(&self, name: &str) -> Result<ModelCard, CliError> {
        if let Some(card) = self.get(name) {
            return Ok(card.clone());
        }
        let path = Path::new(name);
        if path.is_file() {
            return Ok(ModelCard::load(path)?);
        }
        Err(CliError::UnknownModel(name.to_string()))
    }

    pub fn cards(&self) -> impl Iterator<Item = &ModelCard> {
        self.cards.values()
    }
}
