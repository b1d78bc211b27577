use std::collections::HashSet;
use std::fmt;
use std::marker::PhantomData;

use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer};

pub(crate) const DUPLICATE_KEY: &str = "duplicate key";

/// Deserializes a string-keyed object into any map type, rejecting repeated
/// keys instead of silently keeping the last one.
pub(crate) fn unique_map<'de, D, V, M>(deserializer: D) -> Result<M, D::Error>
where
    D: Deserializer<'de>,
    V: Deserialize<'de>,
    M: Default + Extend<(String, V)>,
{
    struct UniqueVisitor<V, M>(PhantomData<(V, M)>);

    impl<'de, V, M> Visitor<'de> for UniqueVisitor<V, M>
    where
        V: Deserialize<'de>,
        M: Default + Extend<(String, V)>,
    {
        type Value = M;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("an object")
        }

        fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<M, A::Error> {
            let mut seen = HashSet::new();
            let mut out = M::default();
            while let Some(key) = access.next_key::<String>()? {
                if !seen.insert(key.clone()) {
                    return Err(de::Error::custom(format!("{DUPLICATE_KEY} `{key}`")));
                }
                let value = access.next_value::<V>()?;
                out.extend([(key, value)]);
            }
            Ok(out)
        }
    }

    deserializer.deserialize_map(UniqueVisitor(PhantomData))
}
