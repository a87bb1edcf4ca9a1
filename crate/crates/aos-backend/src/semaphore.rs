//! Counting semaphore bounding concurrent method executions. Used by the
//! scaling experiments to give each backend a fixed number of
//! core-equivalents on a shared host.

use std::sync::{Condvar, Mutex};

pub struct Semaphore {
    slots: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    pub fn new(slots: usize) -> Semaphore {
        Semaphore {
            slots: Mutex::new(slots.max(1)),
            cv: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut slots = self.slots.lock().unwrap();
        while *slots == 0 {
            slots = self.cv.wait(slots).unwrap();
        }
        *slots -= 1;
        SemaphoreGuard { sem: self }
    }
}

pub struct SemaphoreGuard<'a> {
    sem: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut slots = self.sem.slots.lock().unwrap();
        *slots += 1;
        self.sem.cv.notify_one();
    }
}
