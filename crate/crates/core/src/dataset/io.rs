use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Dataset, DatasetError, Mesh, Node, ObjectId, PropertyKind, PropertyValue, Time};

/// Map that keeps every entry in file order so duplicate keys can be detected.
#[derive(Clone, Debug, Default, PartialEq)]
struct Entries<V>(Vec<(String, V)>);

impl<V: Serialize> Serialize for Entries<V> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

impl<'de, V: Deserialize<'de>> Deserialize<'de> for Entries<V> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct EntriesVisitor<V>(PhantomData<V>);

        impl<'de, V: Deserialize<'de>> Visitor<'de> for EntriesVisitor<V> {
            type Value = Entries<V>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a JSON object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, V>()? {
                    out.push((k, v));
                }
                Ok(Entries(out))
            }
        }

        d.deserialize_map(EntriesVisitor(PhantomData))
    }
}

/// On-disk dataset description. Paths are relative to the manifest's directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    #[serde(default)]
    pub units: String,
    pub time_steps: Vec<Time>,
    meshes: Entries<Entries<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub properties: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lineage: Option<String>,
}

#[derive(Debug, Deserialize, Serialize)]
struct PropRow {
    property: String,
    kind: PropertyKind,
    id: u32,
    t: Time,
    value: String,
}

#[derive(Debug, Deserialize, Serialize)]
struct LineageRow {
    id: u32,
    t: Time,
    child_id: u32,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn table_err(file: &Path, line: u64, msg: impl Into<String>) -> DatasetError {
    DatasetError::Table {
        file: file.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_id(raw: u32, file: &Path, line: u64) -> Result<ObjectId, DatasetError> {
    ObjectId::new(raw).ok_or_else(|| table_err(file, line, "object id 0 is reserved"))
}

/// Loads a manifest and everything it references. Fails without a partial
/// result on any structural error. Derived `volume`/`lifespan` properties are
/// added when the property table does not provide them.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let manifest_path = manifest_path.as_ref();
    let file = File::open(manifest_path).map_err(io_err(manifest_path))?;
    let manifest: Manifest =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| DatasetError::Manifest(e.to_string()))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let steps = &manifest.time_steps;
    let start = *steps.first().ok_or(DatasetError::TimeSteps)?;
    if steps.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(DatasetError::TimeSteps);
    }
    let mut d = Dataset::new(manifest.name.clone(), start, steps.len());
    d.units = manifest.units.clone();

    for (t_key, objects) in &manifest.meshes.0 {
        let t: Time = t_key
            .trim()
            .parse()
            .map_err(|_| DatasetError::Manifest(format!("bad time key {t_key:?}")))?;
        if !d.time_range().contains(&t) {
            return Err(DatasetError::UnknownTime(t));
        }
        for (id_key, rel) in &objects.0 {
            let id = id_key
                .trim()
                .parse::<u32>()
                .ok()
                .and_then(ObjectId::new)
                .ok_or_else(|| DatasetError::Manifest(format!("bad object id {id_key:?}")))?;
            let node = Node::new(id, t);
            if d.contains(id, t) {
                return Err(DatasetError::DuplicateObject(node));
            }
            let path = base.join(rel);
            let f = File::open(&path).map_err(|source| match source.kind() {
                std::io::ErrorKind::NotFound => DatasetError::MissingMesh {
                    node,
                    path: path.clone(),
                },
                _ => DatasetError::Io {
                    path: path.clone(),
                    source,
                },
            })?;
            let mesh = Mesh::read_obj(BufReader::new(f)).map_err(|source| DatasetError::Obj {
                path: path.clone(),
                source,
            })?;
            d.insert_mesh(id, t, mesh)?;
        }
    }

    if let Some(rel) = &manifest.lineage {
        let path = base.join(rel);
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(&path)
            .map_err(|e| csv_open_err(&path, e))?;
        for (i, row) in rdr.deserialize::<LineageRow>().enumerate() {
            let line = i as u64 + 2;
            let row = row.map_err(|e| table_err(&path, line, e.to_string()))?;
            let id = parse_id(row.id, &path, line)?;
            let child = parse_id(row.child_id, &path, line)?;
            d.link(id, row.t, child)?;
        }
    }

    if let Some(rel) = &manifest.properties {
        let path = base.join(rel);
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(&path)
            .map_err(|e| csv_open_err(&path, e))?;
        for (i, row) in rdr.deserialize::<PropRow>().enumerate() {
            let line = i as u64 + 2;
            let row = row.map_err(|e| table_err(&path, line, e.to_string()))?;
            let id = parse_id(row.id, &path, line)?;
            let value = match row.kind {
                PropertyKind::Continuous => {
                    let v: f64 = row
                        .value
                        .parse()
                        .map_err(|_| table_err(&path, line, format!("bad number {:?}", row.value)))?;
                    PropertyValue::Scalar(v)
                }
                PropertyKind::Categorical => PropertyValue::Category(row.value),
            };
            d.properties.insert(&row.property, id, row.t, value)?;
        }
    }

    d.add_derived_properties()?;
    Ok(d)
}

fn csv_open_err(path: &Path, e: csv::Error) -> DatasetError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => DatasetError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => table_err(path, 1, format!("{other:?}")),
    }
}

/// Writes `d` as a manifest directory: `manifest.json`, one OBJ per object
/// instance under `meshes/`, `props.csv` and `lineage.csv`. Returns the
/// manifest path.
pub fn write_dataset(d: &Dataset, dir: impl AsRef<Path>) -> Result<PathBuf, DatasetError> {
    let dir = dir.as_ref();
    let mesh_dir = dir.join("meshes");
    fs::create_dir_all(&mesh_dir).map_err(io_err(&mesh_dir))?;

    let mut meshes = Vec::new();
    for t in d.time_steps() {
        let mut per_t = Vec::new();
        for (id, mesh) in d.objects_at(t) {
            let rel = format!("meshes/t{t:04}_{}.obj", id.get());
            let path = dir.join(&rel);
            let f = File::create(&path).map_err(io_err(&path))?;
            mesh.write_obj(BufWriter::new(f)).map_err(io_err(&path))?;
            per_t.push((id.get().to_string(), rel));
        }
        meshes.push((t.to_string(), Entries(per_t)));
    }

    let lineage_path = dir.join("lineage.csv");
    {
        let mut w = csv::Writer::from_path(&lineage_path).map_err(|e| csv_open_err(&lineage_path, e))?;
        for (p, c) in d.lineage.edges() {
            w.serialize(LineageRow {
                id: p.id.get(),
                t: p.t,
                child_id: c.id.get(),
            })
            .map_err(|e| table_err(&lineage_path, 0, e.to_string()))?;
        }
        w.flush().map_err(io_err(&lineage_path))?;
    }

    let props_path = dir.join("props.csv");
    {
        let mut w = csv::Writer::from_path(&props_path).map_err(|e| csv_open_err(&props_path, e))?;
        // The header must exist even for an empty table.
        w.write_record(["property", "kind", "id", "t", "value"])
            .map_err(|e| table_err(&props_path, 0, e.to_string()))?;
        for (name, prop) in d.properties.iter() {
            for (node, v) in &prop.values {
                let value = match v {
                    PropertyValue::Scalar(x) => x.to_string(),
                    PropertyValue::Category(s) => s.clone(),
                };
                w.write_record([
                    name.to_string(),
                    prop.kind.to_string(),
                    node.id.get().to_string(),
                    node.t.to_string(),
                    value,
                ])
                .map_err(|e| table_err(&props_path, 0, e.to_string()))?;
            }
        }
        w.flush().map_err(io_err(&props_path))?;
    }

    let manifest = Manifest {
        name: d.name.clone(),
        units: d.units.clone(),
        time_steps: d.time_steps().collect(),
        meshes: Entries(meshes),
        properties: Some("props.csv".into()),
        lineage: Some("lineage.csv".into()),
    };
    let manifest_path = dir.join("manifest.json");
    let f = File::create(&manifest_path).map_err(io_err(&manifest_path))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &manifest).map_err(|e| DatasetError::Manifest(e.to_string()))?;
    Ok(manifest_path)
}

impl Manifest {
    /// Number of mesh entries per time key, as listed in the file.
    pub fn mesh_counts(&self) -> BTreeMap<String, usize> {
        self.meshes
            .0
            .iter()
            .map(|(t, objs)| (t.clone(), objs.0.len()))
            .collect()
    }
}
