//! Command-line interface of the `clinfed` binary.
//!
//! [`run`] parses arguments, dispatches and reports errors. Exit status is
//! 0 on success, 1 when a command fails (printed as `error[Code]: ...`)
//! and 2 for usage errors, including malformed queries.

mod output;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::federation::{self, demo, Fault, FederationError, Gateway};
use crate::model::VerticalLevel;
use crate::ontology::{discover_mappings, AnnotationCounts, InformationContent, MappingSet, Ontology, OntologyError};
use crate::query::{enhance, evaluate, execute, optimize, parse, Query, QueryError};
use crate::registry::{Registry, RegistryError, RegistryFile};
use crate::store::{IngestMapping, NodeStore, StoreError, REGISTRY_FILE};

pub use output::Format;
use output::{row_cells, row_headers, Printer};

#[derive(Debug, Parser)]
#[command(name = "clinfed", version, about = "Federated clinical data integration")]
pub struct Cli {
    /// Directory holding the node's records.
    #[arg(long, global = true, env = "CLINFED_DATA_DIR", default_value = "clinfed-data")]
    pub data_dir: PathBuf,
    /// Registry file [default: <data-dir>/registry.json].
    #[arg(long, global = true)]
    pub registry: Option<PathBuf>,
    /// Ontology file [default: <data-dir>/ontology.ont].
    #[arg(long, global = true)]
    pub ontology: Option<PathBuf>,
    /// Federation config file (JSON list of nodes).
    #[arg(long, global = true)]
    pub federation: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Define and inspect clinical variable and event types.
    #[command(subcommand)]
    Metadata(MetadataCmd),
    /// Load ontologies, extract fragments, discover mappings, compare concepts.
    #[command(subcommand)]
    Ontology(OntologyCmd),
    /// Ingest and inspect records.
    #[command(subcommand)]
    Data(DataCmd),
    /// Run queries against the local store.
    #[command(subcommand)]
    Query(QueryCmd),
    /// Run queries across several nodes.
    #[command(subcommand)]
    Fed(FedCmd),
}

#[derive(Debug, Subcommand)]
pub enum MetadataCmd {
    /// Merge definitions from a JSON registry file into the registry.
    Define { file: PathBuf },
    /// List units, classifications, CVTs and METs.
    List,
}

#[derive(Debug, Subcommand)]
pub enum OntologyCmd {
    /// Check an ontology file and install it as the current ontology.
    Load { file: PathBuf },
    /// Print the neighbourhood of some concepts as a standalone ontology.
    Fragment {
        #[arg(required = true)]
        roots: Vec<String>,
        #[arg(long, default_value_t = 1)]
        depth: usize,
    },
    /// Propose mappings from a local ontology onto the current one.
    MapDiscover {
        local: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// JSON object from concept URI to the instance ids annotated with it.
        #[arg(long)]
        instances: Option<PathBuf>,
    },
    /// Resnik similarity of two concepts.
    Sim {
        a: String,
        b: String,
        /// JSON object from concept URI to annotation count
        /// [default: concept counts of the local store].
        #[arg(long)]
        counts: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum DataCmd {
    /// Ingest a CSV file described by a JSON ingest mapping.
    IngestCsv {
        file: PathBuf,
        #[arg(long)]
        mapping: PathBuf,
    },
    /// Ingest a DICOM metadata sidecar (`GGGGEEEE=value` lines).
    IngestDicom {
        file: PathBuf,
        #[arg(long)]
        cvt: String,
        #[arg(long)]
        met: String,
    },
    /// A patient's events grouped by vertical level, in time order.
    View {
        pseudonym: String,
        /// Levels to include [default: all].
        #[arg(long = "level")]
        levels: Vec<VerticalLevel>,
    },
}

#[derive(Debug, Args)]
pub struct QueryOpts {
    pub text: String,
    /// Match concepts literally instead of expanding them.
    #[arg(long)]
    pub no_enhance: bool,
    /// Print the enhanced query and the plan before the rows.
    #[arg(long)]
    pub explain: bool,
}

#[derive(Debug, Subcommand)]
pub enum QueryCmd {
    Run(QueryOpts),
}

#[derive(Debug, Args)]
pub struct FaultOpts {
    /// Make a node unreachable.
    #[arg(long = "fail", value_name = "NODE")]
    pub fail: Vec<String>,
    /// Delay a node's reply.
    #[arg(long = "slow", value_name = "NODE:MS", value_parser = parse_slow)]
    pub slow: Vec<(String, u64)>,
}

#[derive(Debug, Subcommand)]
pub enum FedCmd {
    /// Run a query on a built-in three-node federation.
    Demo {
        #[arg(long, default_value = demo::JAW_QUERY)]
        query: String,
        /// Also write the demo federation's files to this directory.
        #[arg(long)]
        write: Option<PathBuf>,
        #[command(flatten)]
        faults: FaultOpts,
    },
    /// Run a query on the federation described by `--federation`.
    Query {
        text: String,
        #[arg(long)]
        no_enhance: bool,
        #[command(flatten)]
        faults: FaultOpts,
    },
}

fn parse_slow(s: &str) -> Result<(String, u64), String> {
    let (node, ms) = s.rsplit_once(':').ok_or("expected NODE:MS")?;
    let ms = ms.parse().map_err(|e| format!("bad delay {ms:?}: {e}"))?;
    Ok((node.to_string(), ms))
}

/// Failure of a command.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain { code: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain { .. } => 1,
        }
    }

    fn domain(code: &str, message: impl ToString) -> Self {
        CliError::Domain {
            code: code.to_string(),
            message: message.to_string(),
        }
    }
}

macro_rules! coded_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::domain(e.code(), &e)
            }
        }
    )*};
}

coded_error!(RegistryError, StoreError, OntologyError, FederationError);

impl From<QueryError> for CliError {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::Syntax(s) => CliError::Usage(format!("error[SyntaxError]: {s}")),
            other => CliError::domain(other.code(), &other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::domain("Io", e)
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    2
                }
            };
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = match &e {
                CliError::Usage(msg) => writeln!(err, "{msg}"),
                CliError::Domain { code, message } => writeln!(err, "error[{code}]: {message}"),
            };
            e.exit_code()
        }
    }
}

struct Ctx<'a> {
    cli: &'a Cli,
}

impl Ctx<'_> {
    fn registry_path(&self) -> PathBuf {
        self.cli
            .registry
            .clone()
            .unwrap_or_else(|| self.cli.data_dir.join(REGISTRY_FILE))
    }

    fn ontology_path(&self) -> PathBuf {
        self.cli
            .ontology
            .clone()
            .unwrap_or_else(|| self.cli.data_dir.join("ontology.ont"))
    }

    fn registry(&self) -> Result<Registry, CliError> {
        let path = self.registry_path();
        if path.exists() {
            Ok(Registry::load(&path)?)
        } else {
            Ok(Registry::new())
        }
    }

    /// The current ontology, or an empty one when none is installed.
    fn ontology(&self) -> Result<Ontology, CliError> {
        let path = self.ontology_path();
        if path.exists() {
            Ok(Ontology::load(&path)?)
        } else {
            Ok(Ontology::new())
        }
    }

    fn store_exists(&self) -> bool {
        self.cli.data_dir.join(REGISTRY_FILE).exists()
    }

    /// The stored records, or an empty store over the registry.
    fn store(&self) -> Result<NodeStore, CliError> {
        let node = self
            .cli
            .data_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "local".into());
        if self.store_exists() {
            Ok(NodeStore::load(node, &self.cli.data_dir)?)
        } else {
            Ok(NodeStore::new(node, self.registry()?))
        }
    }

    fn printer<'o>(&self, out: &'o mut dyn Write) -> Printer<'o> {
        Printer {
            format: self.cli.format,
            out,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::domain("Io", format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::domain("Format", format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text).map_err(|e| CliError::domain("Io", format!("{}: {e}", path.display())))
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let ctx = Ctx { cli };
    match &cli.command {
        Command::Metadata(cmd) => metadata(&ctx, cmd, out),
        Command::Ontology(cmd) => ontology(&ctx, cmd, out),
        Command::Data(cmd) => data(&ctx, cmd, out),
        Command::Query(QueryCmd::Run(opts)) => query(&ctx, opts, out),
        Command::Fed(cmd) => fed(&ctx, cmd, out),
    }
}

fn metadata(ctx: &Ctx, cmd: &MetadataCmd, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        MetadataCmd::Define { file } => {
            let defs: RegistryFile = read_json(file)?;
            let mut registry = ctx.registry()?;
            let added = registry.merge(defs, true)?;
            write_file(&ctx.registry_path(), &registry.to_json())?;
            ctx.printer(out)
                .note("defined", &added, &format!("defined {added} new entries"))?;
        }
        MetadataCmd::List => {
            let r = ctx.registry()?;
            let mut p = ctx.printer(out);
            let mut rows: Vec<serde_json::Value> = Vec::new();
            for u in r.units() {
                rows.push(serde_json::json!({"kind": "unit", "id": u.symbol, "detail": u.description.clone().unwrap_or_default()}));
            }
            for c in r.classifications() {
                rows.push(serde_json::json!({"kind": "classification", "id": c.name, "detail": c.items.join(" ")}));
            }
            for c in r.cvts() {
                let mut detail = format!("{} {} {}", c.category.as_str(), c.vertical_level, c.name);
                if let Some(u) = &c.unit {
                    detail += &format!(" [{u}]");
                }
                if let Some(cl) = &c.classification {
                    detail += &format!(" <{cl}>");
                }
                rows.push(serde_json::json!({"kind": "cvt", "id": c.id, "detail": detail}));
            }
            for m in r.mets() {
                let members: Vec<&str> = m.member_cvts.iter().map(String::as_str).collect();
                let detail = format!("{} {}: {}", m.vertical_level, m.name, members.join(", "));
                rows.push(serde_json::json!({"kind": "met", "id": m.id, "detail": detail}));
            }
            p.rows(&["kind", "id", "detail"], &rows, |v| {
                ["kind", "id", "detail"]
                    .iter()
                    .map(|k| v[k].as_str().unwrap_or_default().to_string())
                    .collect()
            })?;
        }
    }
    Ok(())
}

fn ontology(ctx: &Ctx, cmd: &OntologyCmd, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        OntologyCmd::Load { file } => {
            let o = Ontology::load(file)?;
            write_file(&ctx.ontology_path(), &o.to_text())?;
            let dangling = o.dangling_bindings(&ctx.registry()?);
            let summary = serde_json::json!({
                "concepts": o.len(),
                "relations": o.relations().count(),
                "bindings": o.bindings().count(),
                "unknown_bound_cvts": dangling,
            });
            let mut text = format!(
                "loaded {} concepts, {} relations, {} bindings into {}",
                o.len(),
                o.relations().count(),
                o.bindings().count(),
                ctx.ontology_path().display()
            );
            if !dangling.is_empty() {
                text += &format!("\nwarning: bindings name CVTs missing from the registry: {}", dangling.join(", "));
            }
            ctx.printer(out).note("loaded", &summary, &text)?;
        }
        OntologyCmd::Fragment { roots, depth } => {
            let frag = ctx.ontology()?.extract_fragment(roots, *depth)?;
            match ctx.cli.format {
                Format::Table => write!(out, "{}", frag.to_text())?,
                Format::Jsonl => {
                    for c in frag.concepts() {
                        writeln!(out, "{}", serde_json::json!({"concept": c}))?;
                    }
                    for r in frag.relations() {
                        writeln!(out, "{}", serde_json::json!({"relation": r}))?;
                    }
                }
            }
        }
        OntologyCmd::MapDiscover {
            local,
            threshold,
            instances,
        } => {
            let local = Ontology::load(local)?;
            let instances: Option<BTreeMap<String, BTreeSet<String>>> =
                instances.as_deref().map(read_json).transpose()?;
            let found = discover_mappings(&local, &ctx.ontology()?, instances.as_ref(), *threshold)?;
            match ctx.cli.format {
                Format::Table => write!(out, "{}", MappingSet::from_mappings(found)?.to_text())?,
                Format::Jsonl => ctx.printer(out).rows(&[], &found, |_| Vec::new())?,
            }
        }
        OntologyCmd::Sim { a, b, counts } => {
            let o = ctx.ontology()?;
            let counts: AnnotationCounts = match counts {
                Some(path) => read_json(path)?,
                None => {
                    let store = ctx.store()?;
                    store
                        .stats()
                        .per_concept
                        .iter()
                        .filter(|(uri, _)| o.contains(uri))
                        .map(|(uri, n)| (uri.clone(), *n as u64))
                        .collect()
                }
            };
            let ic = InformationContent::new(&o, &counts)?;
            let sim = ic.similarity(a, b)?;
            let value = serde_json::json!({"a": a, "b": b, "similarity": sim});
            ctx.printer(out).note("resnik", &value, &format!("{sim:.6}"))?;
        }
    }
    Ok(())
}

fn data(ctx: &Ctx, cmd: &DataCmd, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        DataCmd::IngestCsv { file, mapping } => {
            let mapping: IngestMapping = read_json(mapping)?;
            let mut store = ctx.store()?;
            let input = std::fs::File::open(file).map_err(|e| CliError::domain("Io", format!("{}: {e}", file.display())))?;
            let report = store.ingest_csv(input, &mapping)?;
            store.save(&ctx.cli.data_dir)?;
            let mut text = format!("{} rows stored, {} rejected", report.rows_ok, report.rows_rejected);
            for r in &report.rejected {
                text += &format!("\n  line {}: {}", r.line, r.reason);
            }
            ctx.printer(out).note("ingest", &report, &text)?;
        }
        DataCmd::IngestDicom { file, cvt, met } => {
            let mut store = ctx.store()?;
            let id = store.ingest_dicom(&read(file)?, cvt, met)?;
            store.save(&ctx.cli.data_dir)?;
            ctx.printer(out).note("event_id", &id, &format!("stored {id}"))?;
        }
        DataCmd::View { pseudonym, levels } => {
            let store = ctx.store()?;
            let levels: BTreeSet<VerticalLevel> = if levels.is_empty() {
                VerticalLevel::ALL.into_iter().collect()
            } else {
                levels.iter().copied().collect()
            };
            let timeline = store.longitudinal_view(pseudonym, &levels)?;
            let rows: Vec<serde_json::Value> = timeline
                .groups
                .iter()
                .flat_map(|g| {
                    g.entries.iter().map(move |e| {
                        serde_json::json!({
                            "level": g.level.as_str(),
                            "event_id": e.event_id,
                            "event_type": e.event_type,
                            "time": output::time_cell(&Some(e.time)),
                        })
                    })
                })
                .collect();
            let keys = ["level", "event_id", "event_type", "time"];
            ctx.printer(out).rows(&keys, &rows, |v| {
                keys.iter()
                    .map(|k| match &v[k] {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect()
            })?;
        }
    }
    Ok(())
}

fn query(ctx: &Ctx, opts: &QueryOpts, out: &mut dyn Write) -> Result<(), CliError> {
    let parsed = parse(&opts.text).map_err(QueryError::from)?;
    let store = ctx.store()?;
    let q = if opts.no_enhance {
        parsed
    } else {
        enhance(&parsed, &ctx.ontology()?)?
    };
    let plan = optimize(&q, store.stats());
    let mut p = ctx.printer(out);
    if opts.explain {
        let info = serde_json::json!({"enhanced": q.to_string(), "plan": plan});
        p.note("explain", &info, &format!("enhanced: {q}\n{plan}"))?;
    }
    let rows = execute(&plan, &store)?;
    debug_assert_eq!(rows, evaluate(&q, &store));
    p.rows(row_headers(rows.target), &rows.rows, |r| row_cells(rows.target, r))?;
    Ok(())
}

fn apply_faults(g: &Gateway, faults: &FaultOpts) -> Result<(), CliError> {
    for node in &faults.fail {
        g.inject_fault(node, Fault::Unreachable)?;
    }
    for (node, ms) in &faults.slow {
        g.inject_fault(node, Fault::SlowBy(*ms))?;
    }
    Ok(())
}

fn run_federated(g: &Gateway, text: &str, no_enhance: bool, p: &mut Printer) -> Result<(), CliError> {
    let q: Query = parse(text).map_err(QueryError::from)?;
    let result = if no_enhance {
        g.execute_enhanced(&q)?
    } else {
        g.execute(&q)?
    };
    let mut headers = vec!["node"];
    headers.extend(row_headers(result.target));
    p.rows(&headers, &result.rows, |r| {
        let mut cells = vec![r.node_id.clone()];
        cells.extend(row_cells(result.target, &r.row));
        cells
    })?;
    let summary = serde_json::json!({
        "query": result.query,
        "rows": result.rows.len(),
        "partial": result.partial,
        "unreachable": result.unreachable,
        "dropped_predicates": result.dropped_predicates,
    });
    let n = result.rows.len();
    let mut text = format!("query: {}\n{n} row{}", result.query, if n == 1 { "" } else { "s" });
    if result.partial {
        text += &format!(", partial (unreachable: {})", result.unreachable.join(", "));
    }
    for (node, uri) in &result.dropped_predicates {
        text += &format!("\n{node}: no local concept for {uri}");
    }
    p.note("summary", &summary, &text)?;
    Ok(())
}

fn fed(ctx: &Ctx, cmd: &FedCmd, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        FedCmd::Demo { query, write, faults } => {
            if let Some(dir) = write {
                demo::write(dir)?;
            }
            let g = demo::gateway();
            apply_faults(&g, faults)?;
            run_federated(&g, query, false, &mut ctx.printer(out))
        }
        FedCmd::Query {
            text,
            no_enhance,
            faults,
        } => {
            let config = ctx
                .cli
                .federation
                .as_deref()
                .ok_or_else(|| CliError::Usage("fed query needs --federation <FILE>".into()))?;
            let g = federation::gateway_from_config(config, Arc::new(ctx.ontology()?))?;
            apply_faults(&g, faults)?;
            run_federated(&g, text, *no_enhance, &mut ctx.printer(out))
        }
    }
}
