//! Placeholder, filled in as the layer above lands.
