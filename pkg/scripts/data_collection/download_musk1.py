#!/usr/bin/env python3
"""
Musk1 Dataset Downloader

Fetches the Musk (version 1) archive from the UCI repository, unpacks
clean1.data into ./data/ and checks that it parses into 92 bags.
"""

import argparse
import io
import logging
import shutil
import subprocess
import sys
import time
import zipfile
from pathlib import Path

import requests

sys.path.insert(0, str(Path(__file__).resolve().parents[2]))

from citation_mil.errors import MilError  # noqa: E402
from citation_mil.ingest import dataset_summary, load_musk_csv  # noqa: E402

# Configuration
DOWNLOAD_URL = "https://archive.ics.uci.edu/static/public/75/musk+version+1.zip"
data_folder = Path("./data")
EXPECTED_BAGS = 92

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s',
    handlers=[
        logging.FileHandler('download_log.txt'),
        logging.StreamHandler()
    ]
)
logger = logging.getLogger(__name__)


def download_archive(url, retry_count=3):
    """Download the zip archive with retry logic; returns its bytes or None"""
    for attempt in range(retry_count):
        try:
            logger.info(f"📥 Downloading: {url} (attempt {attempt + 1})")
            response = requests.get(url, timeout=120)
            response.raise_for_status()
            logger.info(f"✅ SUCCESS: {len(response.content):,} bytes")
            return response.content
        except requests.exceptions.RequestException as e:
            logger.warning(f"⚠️  DOWNLOAD ERROR (attempt {attempt + 1}): {e}")
            if getattr(e, 'response', None) is not None and e.response.status_code == 404:
                logger.warning("   Archive not found at this address")
                break
            if attempt < retry_count - 1:
                wait_time = (attempt + 1) * 5
                logger.info(f"   ⏳ Retrying in {wait_time} seconds...")
                time.sleep(wait_time)
    return None


def extract_clean1(archive_bytes, target_folder):
    """
    Pull clean1.data out of the archive. The UCI copy ships it
    compress(1)-ed as clean1.data.Z, which gzip can undo.

    Returns:
        Path of the extracted data file, or None.
    """
    target_folder.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(io.BytesIO(archive_bytes)) as archive:
        members = {Path(name).name: name for name in archive.namelist()}
        for candidate in ("clean1.data", "clean1.data.Z"):
            if candidate in members:
                destination = target_folder / candidate
                with archive.open(members[candidate]) as source, open(destination, 'wb') as sink:
                    shutil.copyfileobj(source, sink)
                break
        else:
            logger.error(f"❌ clean1.data not found in archive: {sorted(members)}")
            return None

    if destination.suffix == ".Z":
        if shutil.which("gzip") is None:
            logger.error("❌ gzip is needed to unpack clean1.data.Z")
            return None
        result = subprocess.run(["gzip", "-d", "-f", str(destination)], capture_output=True, text=True)
        if result.returncode != 0:
            logger.error(f"❌ gzip failed: {result.stderr.strip()}")
            return None
        destination = destination.with_suffix("")
    logger.info(f"📁 Saved: {destination}")
    return destination


def main():
    parser = argparse.ArgumentParser(description='Download the Musk1 multi-instance dataset')
    parser.add_argument('--url', default=DOWNLOAD_URL, help='archive location')
    parser.add_argument('--force', action='store_true', help='download even if clean1.data exists')
    args = parser.parse_args()

    data_path = data_folder / "clean1.data"
    if data_path.exists() and not args.force:
        logger.info(f"⏭️  SKIPPED: {data_path} already exists")
    else:
        archive_bytes = download_archive(args.url)
        if archive_bytes is None:
            return 1
        data_path = extract_clean1(archive_bytes, data_folder)
        if data_path is None:
            return 1

    try:
        data = load_musk_csv(data_path)
    except MilError as e:
        logger.error(f"❌ {data_path} does not parse: {e}")
        return 1
    logger.info(f"📊 {dataset_summary(data)}")
    if len(data) != EXPECTED_BAGS:
        logger.warning(f"⚠️  expected {EXPECTED_BAGS} bags, found {len(data)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
