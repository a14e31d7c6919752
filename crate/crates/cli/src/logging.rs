//! JSON-lines log records on stderr; `LONGIRAD_LOG` sets the filter.

use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use log::kv::{Error, Key, Value, VisitSource};
use serde_json::{Map, Value as Json};

struct Fields<'a>(&'a mut Map<String, Json>);

impl<'kvs> VisitSource<'kvs> for Fields<'_> {
    fn visit_pair(&mut self, key: Key<'kvs>, value: Value<'kvs>) -> Result<(), Error> {
        let v = if let Some(u) = value.to_u64() {
            Json::from(u)
        } else if let Some(i) = value.to_i64() {
            Json::from(i)
        } else if let Some(f) = value.to_f64() {
            Json::from(f)
        } else if let Some(b) = value.to_bool() {
            Json::from(b)
        } else {
            Json::from(value.to_string())
        };
        self.0.insert(key.to_string(), v);
        Ok(())
    }
}

pub fn init() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LONGIRAD_LOG", "info"))
        .format(|buf, record| {
            let ts = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_millis() as u64);
            let mut obj = Map::new();
            obj.insert("ts_ms".into(), ts.into());
            obj.insert("level".into(), record.level().as_str().into());
            obj.insert("target".into(), record.target().into());
            obj.insert("msg".into(), record.args().to_string().into());
            let _ = record.key_values().visit(&mut Fields(&mut obj));
            writeln!(buf, "{}", Json::Object(obj))
        })
        .init();
}
