#!/usr/bin/env python3
"""Reference encoder states from the HuggingFace BertModel, in float64.

  bert_reference.py mini DIR   reads DIR/weights and DIR/states (written by
                               make_encoder_golden), runs the same probe through
                               BertModel and writes DIR/hf_states
  bert_reference.py tiny DIR   writes a randomly initialised small BERT as a
                               float32 archive (DIR/weights, DIR/vocab.txt), a
                               probe text and the BertModel states (DIR/hf_states)

Also usable as a converter for real checkpoints:
  bert_reference.py convert HF_MODEL_DIR OUT_DIR
"""
import json
import struct
import sys
from pathlib import Path

import numpy as np
import torch
from transformers import BertConfig, BertModel


def write_archive(path, tensors, meta, dtype="float64"):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    np_dtype = np.float64 if dtype == "float64" else np.float32
    entries, blobs, offset = {}, [], 0
    for name in sorted(tensors):
        arr = np.ascontiguousarray(np.asarray(tensors[name], dtype=np_dtype))
        raw = arr.astype("<f8" if dtype == "float64" else "<f4").tobytes()
        entries[name] = {"shape": list(arr.shape), "dtype": dtype, "offset": offset}
        blobs.append(raw)
        offset += len(raw)
    (path / "tensors.bin").write_bytes(b"".join(blobs))
    manifest = {"format": "hsd-tensor-archive", "version": 1, "data_file": "tensors.bin",
                "meta": meta, "tensors": entries}
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2))


def read_archive(path):
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    data = (path / manifest["data_file"]).read_bytes()
    out = {}
    for name, e in manifest["tensors"].items():
        dt = "<f8" if e["dtype"] == "float64" else "<f4"
        n = int(np.prod(e["shape"])) if e["shape"] else 1
        size = np.dtype(dt).itemsize
        arr = np.frombuffer(data[e["offset"]:e["offset"] + n * size], dtype=dt)
        out[name] = arr.reshape(e["shape"]).astype(np.float64)
    return out, manifest["meta"]


def bert_from(tensors, cfg):
    config = BertConfig(
        vocab_size=cfg["vocab_size"], hidden_size=cfg["hidden_size"],
        num_hidden_layers=cfg["num_layers"], num_attention_heads=cfg["num_heads"],
        intermediate_size=cfg["intermediate_size"], max_position_embeddings=cfg["max_positions"],
        type_vocab_size=cfg["type_vocab_size"], layer_norm_eps=cfg["layer_norm_eps"],
        hidden_act="gelu", hidden_dropout_prob=0.0, attention_probs_dropout_prob=0.0)
    model = BertModel(config, add_pooling_layer=False).double().eval()
    state = {k: torch.from_numpy(np.array(v)) for k, v in tensors.items() if not k.startswith("pooler")}
    missing, unexpected = model.load_state_dict(state, strict=False)
    missing = [m for m in missing if not m.endswith("position_ids")]
    if missing or unexpected:
        raise SystemExit(f"state mismatch: missing={missing} unexpected={unexpected}")
    return model


def layer_states(model, ids, content_length):
    ids_t = torch.tensor([ids], dtype=torch.long)
    mask = torch.tensor([[1 if i < content_length else 0 for i in range(len(ids))]])
    with torch.no_grad():
        out = model(input_ids=ids_t, attention_mask=mask, token_type_ids=torch.zeros_like(ids_t),
                    output_hidden_states=True)
    # drop the embedding output; keep content positions only
    return np.stack([h[0, :content_length].numpy() for h in out.hidden_states[1:]])


def mini(directory):
    d = Path(directory)
    tensors, meta = read_archive(d / "weights")
    _, probe = read_archive(d / "states")
    model = bert_from(tensors, meta["config"])
    states = layer_states(model, probe["ids"], probe["content_length"])
    write_archive(d / "hf_states", {"states": states}, {"content_length": probe["content_length"]})


def tiny(directory):
    d = Path(directory)
    torch.manual_seed(1234)
    cfg = {"vocab_size": 40, "hidden_size": 24, "num_layers": 3, "num_heads": 3,
           "intermediate_size": 40, "max_positions": 32, "type_vocab_size": 2,
           "layer_norm_eps": 1e-12}
    config = BertConfig(
        vocab_size=cfg["vocab_size"], hidden_size=cfg["hidden_size"],
        num_hidden_layers=cfg["num_layers"], num_attention_heads=cfg["num_heads"],
        intermediate_size=cfg["intermediate_size"], max_position_embeddings=cfg["max_positions"],
        type_vocab_size=cfg["type_vocab_size"], layer_norm_eps=cfg["layer_norm_eps"])
    model = BertModel(config)  # random init, includes a pooler
    with torch.no_grad():
        for p in model.parameters():
            p.add_(0.05 * torch.randn_like(p))  # LayerNorm away from identity
    sd = {k: v.detach().numpy().astype(np.float32) for k, v in model.state_dict().items()
          if not k.endswith("position_ids")}
    meta = {"kind": "encoder", "config": cfg}
    write_archive(d / "weights", sd, meta, dtype="float32")

    vocab = ["[PAD]", "[unused0]", "[unused1]", "[unused2]", "[unused3]", "[unused4]",
             "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    words = ["hello", "world", "not", "sex", "##ist", "the", "cat", "dog", "run", "##ning",
             "a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l", "m", "n", "o", "p",
             "q", "r", "s", "t"]
    vocab += words
    assert len(vocab) == cfg["vocab_size"]
    (d / "vocab.txt").write_text("\n".join(vocab) + "\n")

    text = "hello not sexist <user> running cat"
    placeholders = ["<user>", "<number>", "<hashtag>", "<url>", "<emoticon>"]
    table = {t: i for i, t in enumerate(vocab)}
    for slot, ph in enumerate(placeholders):
        table[ph] = table[f"[unused{slot}]"]
    pieces = ["hello", "not", "sex", "##ist", "<user>", "run", "##ning", "cat"]
    ids = [table["[CLS]"]] + [table[p] for p in pieces] + [table["[SEP]"]]
    content = len(ids)
    ids += [0] * (32 - content)

    ref = bert_from({k: v.astype(np.float64) for k, v in sd.items()}, cfg)
    states = layer_states(ref, ids, content)
    write_archive(d / "hf_states", {"states": states},
                  {"text": text, "ids": ids, "content_length": content, "max_len": 32})


def convert(src, dst):
    model = BertModel.from_pretrained(src)
    c = model.config
    cfg = {"vocab_size": c.vocab_size, "hidden_size": c.hidden_size,
           "num_layers": c.num_hidden_layers, "num_heads": c.num_attention_heads,
           "intermediate_size": c.intermediate_size,
           "max_positions": c.max_position_embeddings, "type_vocab_size": c.type_vocab_size,
           "layer_norm_eps": c.layer_norm_eps}
    sd = {k: v.detach().numpy() for k, v in model.state_dict().items()
          if not k.endswith("position_ids")}
    write_archive(Path(dst) / "weights", sd, {"kind": "encoder", "config": cfg}, dtype="float32")
    vocab = Path(src) / "vocab.txt"
    if vocab.exists():
        (Path(dst) / "vocab.txt").write_text(vocab.read_text())


if __name__ == "__main__":
    mode = sys.argv[1]
    if mode == "mini":
        mini(sys.argv[2])
    elif mode == "tiny":
        tiny(sys.argv[2])
    elif mode == "convert":
        convert(sys.argv[2], sys.argv[3])
    else:
        raise SystemExit(__doc__)
