from typing import Any, Dict, Optional

import torch
from torch import nn
from torch.nn import functional as F

from Datasets.transforms import resize_center_crop
from Metrics.interfaces import LabelPredictor
from errors import ContractViolation

PREDICT_BATCH = 512


class ClassifierModel(nn.Module, LabelPredictor):
    """
    Classifier exposing penultimate features and logits.

    Image inputs are resized and center-cropped by prepare() before inference
    when resize_to is set.
    """
    kind = "abstract"

    def __init__(self, class_count: int, feature_dim: int, resize_to: Optional[int] = None,
                 crop_to: Optional[int] = None):
        super().__init__()
        if class_count < 2:
            raise ContractViolation(f"a classifier needs at least 2 classes, got {class_count}")
        self.class_count = class_count
        self.feature_dim = feature_dim
        self.resize_to = resize_to
        self.crop_to = crop_to

    def features(self, x: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def prepare(self, samples: torch.Tensor) -> torch.Tensor:
        if self.resize_to is None or samples.ndim != 4:
            return samples
        return resize_center_crop(samples, self.resize_to, self.crop_to or self.resize_to)

    def logits(self, samples: torch.Tensor) -> torch.Tensor:
        """Eval-mode logits for raw samples, computed in batches."""
        self.eval()
        with torch.no_grad():
            chunks = [self(self.prepare(samples[start:start + PREDICT_BATCH]))
                      for start in range(0, samples.shape[0], PREDICT_BATCH)]
        if not chunks:
            return torch.zeros(0, self.class_count)
        return torch.cat(chunks)

    def predict(self, samples: torch.Tensor) -> torch.Tensor:
        return self.logits(samples).argmax(dim=1)

    def architecture(self) -> Dict[str, Any]:
        raise NotImplementedError


class MLPClassifier(ClassifierModel):
    """Two-layer perceptron for vector data; the hidden layer is the feature space."""
    kind = "mlp"

    def __init__(self, dimension: int, class_count: int, hidden: int = 128, dropout: float = 0.0):
        super().__init__(class_count, hidden)
        self.dimension = dimension
        self.hidden = hidden
        self.dropout_rate = dropout
        self.layer = nn.Linear(dimension, hidden)
        self.dropout = nn.Dropout(dropout)
        self.head = nn.Linear(hidden, class_count)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        return F.relu(self.layer(x))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.dropout(self.features(x)))

    def architecture(self) -> Dict[str, Any]:
        return {"kind": self.kind, "dimension": self.dimension, "class_count": self.class_count,
                "hidden": self.hidden, "dropout": self.dropout_rate}


class BasicBlock(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_channels)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_channels)
        self.shortcut = nn.Sequential()
        if stride != 1 or in_channels != out_channels:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_channels, out_channels, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_channels),
            )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = F.relu(self.bn1(self.conv1(x)))
        h = self.bn2(self.conv2(h))
        return F.relu(h + self.shortcut(x))


class ResidualConvNet(ClassifierModel):
    """Six residual blocks in three stages of widths (20, 40, 80) with a 64-d feature layer, about 0.28M parameters."""
    kind = "resnet"

    def __init__(self, channels: int, class_count: int, widths=(20, 40, 80), feature_dim: int = 64,
                 dropout: float = 0.0, resize_to: Optional[int] = None, crop_to: Optional[int] = None):
        super().__init__(class_count, feature_dim, resize_to, crop_to)
        self.channels = channels
        self.widths = tuple(widths)
        self.dropout_rate = dropout
        self.stem = nn.Sequential(
            nn.Conv2d(channels, self.widths[0], 3, padding=1, bias=False),
            nn.BatchNorm2d(self.widths[0]),
            nn.ReLU(),
        )
        blocks = []
        in_channels = self.widths[0]
        for index, width in enumerate(self.widths):
            stride = 1 if index == 0 else 2
            blocks.append(BasicBlock(in_channels, width, stride))
            blocks.append(BasicBlock(width, width))
            in_channels = width
        self.blocks = nn.Sequential(*blocks)
        self.embed = nn.Linear(in_channels, feature_dim)
        self.dropout = nn.Dropout(dropout)
        self.head = nn.Linear(feature_dim, class_count)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        h = self.blocks(self.stem(x))
        return F.relu(self.embed(F.adaptive_avg_pool2d(h, 1).flatten(1)))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.dropout(self.features(x)))

    def architecture(self) -> Dict[str, Any]:
        return {"kind": self.kind, "channels": self.channels, "class_count": self.class_count,
                "widths": list(self.widths), "feature_dim": self.feature_dim, "dropout": self.dropout_rate,
                "resize_to": self.resize_to, "crop_to": self.crop_to}


CLASSIFIERS = {
    MLPClassifier.kind: MLPClassifier,
    ResidualConvNet.kind: ResidualConvNet,
}


def build_classifier(architecture: Dict[str, Any]) -> ClassifierModel:
    arguments = dict(architecture)
    kind = arguments.pop("kind", None)
    if kind not in CLASSIFIERS:
        raise ContractViolation(f"unknown classifier kind {kind!r}")
    return CLASSIFIERS[kind](**arguments)
