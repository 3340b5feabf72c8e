//! Normalize raw JSONL records and read them back as documents.
//!
//!     cargo run --example normalize_corpus

use std::io::Cursor;

use vocabdrift::corpus::{normalize_text, read_documents, write_documents, Document, RawRecord};

fn main() -> vocabdrift::Result<()> {
    for raw in [
        "Check https://t.co/abc @alice!",
        "Mail me: Bob.Smith@Example.ORG   or   visit HTTP://x.io/path",
        "#COVID19 cases rising\tin #NYC",
    ] {
        println!("{raw:?}\n  -> {:?}", normalize_text(raw));
    }

    let jsonl = r##"{"id":"t1","text":"Hello @user_42 see https://t.co/x","year":2019}
{"id":"t2","text":"GRIEZMANN scores again!!","year":2020}
{"id":"t3","text":"#WorldCup  final","year":2020}
"##;
    let docs = read_documents(Cursor::new(jsonl), Some(2020))?;
    println!("\n{} documents from 2020:", docs.len());
    for d in &docs {
        println!("  {} [{} tokens] {}", d.id, d.token_count, d.text);
    }

    let record = RawRecord {
        id: "t4".into(),
        text: "Breaking: NEWS".into(),
        epoch: 2021,
    };
    let mut out = Vec::new();
    write_documents(&mut out, &[Document::from_raw(record)])?;
    print!("\nnormalized output: {}", String::from_utf8_lossy(&out));
    Ok(())
}
