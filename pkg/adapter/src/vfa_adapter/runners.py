"""Classifier runners behind the adapter.

A runner maps a batch of stimuli to raw labels.  The mode fixes the label
vocabulary: ``top1_imagenet1k`` emits 1000-class identifiers,
``superclass_direct`` and ``zero_shot_text`` emit the 16 superclass names.

Built-in runners need no ML runtime: ``builtin:mean-pixel`` buckets mean
luminance into the vocabulary (a trivial but conforming classifier) and
``builtin:oracle`` answers from a planted Gaussian channel (see oracle.py).
Real models load lazily: ``torchvision:<name>`` for supervised top-1 and
``clip:<hub-id>`` for zero-shot image-text matching with the bundled prompt
fixtures.
"""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .manifest import Entry, Manifest
from .oracle import OracleChannel

MODES = ("top1_imagenet1k", "superclass_direct", "zero_shot_text")

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class RunnerError(Exception):
    pass


def load_superclasses() -> list[str]:
    text = (resources.files("vfa_adapter") / "data" / "superclasses16.txt").read_text(
        encoding="utf-8"
    )
    return [line.strip() for line in text.splitlines() if line.strip()]


def load_prompts() -> dict[str, list[str]]:
    raw = (resources.files("vfa_adapter") / "data" / "zero_shot_prompts.json").read_text(
        encoding="utf-8"
    )
    return json.loads(raw)


class MeanPixelRunner:
    """Trivial classifier: mean luminance bucketed into the vocabulary."""

    needs_pixels = True

    def __init__(self, mode: str):
        if mode not in MODES:
            raise RunnerError(f"unknown mode {mode!r}")
        self.mode = mode
        self.superclasses = load_superclasses()
        if mode == "zero_shot_text":
            # vocabulary comes from the prompt fixture in zero-shot mode
            self.superclasses = sorted(load_prompts())

    def predict(self, entries: list[Entry], images: list[np.ndarray]) -> list[str]:
        labels = []
        for image in images:
            mean = float(np.clip(image.mean(), 0.0, 1.0 - 1e-9))
            if self.mode == "top1_imagenet1k":
                labels.append(str(int(mean * 1000)))
            else:
                labels.append(self.superclasses[int(mean * len(self.superclasses))])
        return labels


class PlantedOracleRunner:
    """Reads true labels and flips them per the planted channel's accuracy."""

    needs_pixels = False

    def __init__(self, mode: str, manifest: Manifest, channel: OracleChannel):
        if mode != "superclass_direct":
            raise RunnerError("builtin:oracle supports only superclass_direct mode")
        self.mode = mode
        self.superclasses = load_superclasses()
        self._labels: dict[str, str] = {}
        cells: dict[tuple, list[Entry]] = {}
        for entry in manifest.entries:
            cells.setdefault((entry.band_center, entry.target_sd), []).append(entry)
        for (center, sd), members in cells.items():
            accuracy = channel.accuracy(center, sd)
            correct = channel.correct_ids([e.stimulus_id for e in members], accuracy)
            for entry in members:
                truth = manifest.true_superclass(entry)
                if entry.stimulus_id in correct:
                    self._labels[entry.stimulus_id] = truth
                else:
                    wrong_index = (self.superclasses.index(truth) + 1) % len(self.superclasses)
                    self._labels[entry.stimulus_id] = self.superclasses[wrong_index]

    def predict(self, entries: list[Entry], images) -> list[str]:
        return [self._labels[e.stimulus_id] for e in entries]


class TorchvisionRunner:
    """Supervised top-1 over a torchvision architecture.

    Stimulus pixels are trusted as-is (the manifest records the resize);
    only the model's normalization is applied, unless ``model_preprocess``
    asks for the weights' full transform chain.  ``weights_path`` loads a
    local state dict; with neither weights nor hub access the network is
    randomly initialized from ``seed`` (useful for plumbing tests only).
    """

    needs_pixels = True

    def __init__(
        self,
        arch: str,
        mode: str,
        device: str = "cpu",
        weights: str | None = None,
        weights_path: str | None = None,
        model_preprocess: bool = False,
        seed: int = 0,
    ):
        if mode != "top1_imagenet1k":
            raise RunnerError("torchvision runners emit 1000-class labels; use top1_imagenet1k")
        try:
            import torch
            import torchvision.models as tvm
        except ImportError as exc:  # pragma: no cover - env without torch
            raise RunnerError(f"torchvision runner needs torch installed: {exc}") from exc
        if not hasattr(tvm, arch):
            raise RunnerError(f"unknown torchvision architecture {arch!r}")
        self._torch = torch
        torch.manual_seed(seed)
        self._transform = None
        if weights:
            weight_enum = tvm.get_model_weights(arch)[weights]
            self.model = getattr(tvm, arch)(weights=weight_enum)
            if model_preprocess:
                self._transform = weight_enum.transforms()
        else:
            self.model = getattr(tvm, arch)(weights=None)
            if weights_path:
                state = torch.load(weights_path, map_location="cpu")
                self.model.load_state_dict(state)
        self.device = device
        self.model.eval().to(device)

    def predict(self, entries, images: list[np.ndarray]) -> list[str]:
        torch = self._torch
        batch = torch.from_numpy(np.stack(images)).permute(0, 3, 1, 2).float()
        if self._transform is not None:
            batch = self._transform(batch)
        else:
            mean = torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1)
            std = torch.tensor(IMAGENET_STD).view(1, 3, 1, 1)
            batch = (batch - mean) / std
        with torch.no_grad():
            logits = self.model(batch.to(self.device))
        return [str(int(i)) for i in logits.argmax(dim=1).cpu().tolist()]


class ClipZeroShotRunner:
    """Zero-shot image-text matching over the 16 superclass prompts.

    Needs the transformers CLIP weights available locally or via hub; the
    prompt fixture is editable.  Prompt embeddings are averaged per class.
    """

    needs_pixels = True

    def __init__(self, hub_id: str, mode: str, device: str = "cpu"):
        if mode != "zero_shot_text":
            raise RunnerError("clip runners emit superclass names; use zero_shot_text")
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:  # pragma: no cover - env without transformers
            raise RunnerError(f"clip runner needs transformers installed: {exc}") from exc
        self._torch = torch
        self.device = device
        self.model = CLIPModel.from_pretrained(hub_id).eval().to(device)
        self.processor = CLIPProcessor.from_pretrained(hub_id)
        prompts = load_prompts()
        self.superclasses = sorted(prompts)
        texts = [p for name in self.superclasses for p in prompts[name]]
        counts = [len(prompts[name]) for name in self.superclasses]
        with torch.no_grad():
            inputs = self.processor(text=texts, return_tensors="pt", padding=True)
            embeds = self.model.get_text_features(**{k: v.to(device) for k, v in inputs.items()})
        embeds = embeds / embeds.norm(dim=-1, keepdim=True)
        per_class = []
        start = 0
        for count in counts:
            per_class.append(embeds[start : start + count].mean(dim=0))
            start += count
        self.text_embeds = torch.stack(per_class)
        self.text_embeds = self.text_embeds / self.text_embeds.norm(dim=-1, keepdim=True)

    def predict(self, entries, images: list[np.ndarray]) -> list[str]:
        torch = self._torch
        pil_like = [(np.clip(im, 0, 1) * 255).astype("uint8") for im in images]
        inputs = self.processor(images=pil_like, return_tensors="pt")
        with torch.no_grad():
            feats = self.model.get_image_features(
                **{k: v.to(self.device) for k, v in inputs.items()}
            )
        feats = feats / feats.norm(dim=-1, keepdim=True)
        scores = feats @ self.text_embeds.T
        return [self.superclasses[int(i)] for i in scores.argmax(dim=1).cpu().tolist()]


def build_runner(config, manifest: Manifest):
    """Instantiate the runner named by the model identifier."""
    model = config.model
    if model == "builtin:mean-pixel":
        return MeanPixelRunner(config.mode)
    if model == "builtin:oracle":
        channel = OracleChannel(**(config.oracle or {}))
        return PlantedOracleRunner(config.mode, manifest, channel)
    if model.startswith("torchvision:"):
        return TorchvisionRunner(
            model.split(":", 1)[1],
            config.mode,
            device=config.device,
            weights=config.weights,
            weights_path=config.weights_path,
            model_preprocess=config.model_preprocess,
            seed=config.seed,
        )
    if model.startswith("clip:"):
        return ClipZeroShotRunner(model.split(":", 1)[1], config.mode, device=config.device)
    raise RunnerError(
        f"unknown model identifier {model!r} (expected builtin:mean-pixel, "
        "builtin:oracle, torchvision:<arch>, or clip:<hub-id>)"
    )
